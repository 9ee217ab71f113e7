#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vpki {

// Values travel in error envelopes; never renumber.
enum class ErrorCode : std::uint16_t {
  ok = 0,
  decode_error = 1,
  frame_error = 2,
  stale_timestamp = 3,
  replayed_nonce = 4,
  duplicate_subject = 5,
  bad_proof_of_possession = 6,
  revoked_credential = 7,
  unknown_subject = 8,
  overlapping_ticket = 9,
  bad_signature = 10,
  unknown_issuer = 11,
  ticket_binding_mismatch = 12,
  ticket_reused = 13,
  interval_violation = 14,
  unknown_ticket = 15,
  unauthorized = 16,
  ticket_invalid = 17,
  malicious_requester = 18,
  no_slot = 19,
  empty_request = 20,
  unknown_pseudonym = 21,
  not_found = 22,
  foreign_unreachable = 23,
  response_invalid = 24,
  mismatched_response = 25,
  scenario_invalid = 26,
  service_spawn_failure = 27,
  io_error = 28,
  missing_ground_truth = 29,
  snapshot_missing = 30,
  transport_error = 31,
  invalid_argument = 32,
  expired = 33,
  batch_too_large = 34,
  unsupported_message = 35,
  internal = 255,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  explicit Error(ErrorCode code, const std::string& detail = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace vpki
