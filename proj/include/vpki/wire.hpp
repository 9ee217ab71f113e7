#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <unordered_map>

#include "vpki/bytes.hpp"

namespace vpki::wire {

/// Message type registry. Codes are part of the frame format.
enum class MsgType : std::uint16_t {
  ticket_req = 0x0001,
  ticket_res = 0x0002,
  psnym_req = 0x0003,
  psnym_res = 0x0004,
  ftkt_req = 0x0005,
  ftkt_res = 0x0006,
  ntkt_req = 0x0007,
  ntkt_res = 0x0008,
  crl_req = 0x0010,
  crl_res = 0x0011,
  ocsp_req = 0x0012,
  ocsp_res = 0x0013,
  resolve_req = 0x0020,          // operator -> RA
  resolve_res = 0x0021,
  resolve_map_req = 0x0022,      // RA -> PCA: pseudonym -> ticket (+ optional revocation)
  resolve_map_res = 0x0023,
  resolve_ticket_req = 0x0024,   // RA -> LTCA: ticket -> identity (+ optional LTC revocation)
  resolve_ticket_res = 0x0025,
  dir_req = 0x0030,
  dir_res = 0x0031,
  reg_req = 0x0040,
  reg_res = 0x0041,
  ltc_update_req = 0x0042,
  ltc_update_res = 0x0043,
  err = 0x00FF,
};

std::string_view to_string(MsgType t);
/// Response code paired with a request code; err stays err.
MsgType response_type(MsgType request);

enum class ChannelAuthMode { mutual, server_only };
/// Ticket issuance requires the requester's long-term credential; everything
/// else authenticates the server only.
ChannelAuthMode required_auth(MsgType request);

struct Envelope {
  std::uint16_t msg_type = 0;
  std::uint64_t nonce = 0;
  TimePoint timestamp = 0;
  Bytes payload;

  MsgType type() const { return static_cast<MsgType>(msg_type); }
  bool operator==(const Envelope&) const = default;
};

inline constexpr std::uint8_t kMagic[4] = {'V', 'P', 'K', 'I'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderBytes = 4 + 1 + 2 + 8 + 8 + 4;
inline constexpr std::size_t kMaxPayloadBytes = 16u << 20;

Bytes frame(const Envelope& env);
/// Throws Error(frame_error) on bad magic, version, length or truncation.
Envelope deframe(ByteView bytes);
/// Payload length announced by a header; validates magic/version/limit.
std::size_t payload_length_from_header(ByteView header);

inline constexpr TimePoint kDefaultSkewSeconds = 300;

/// Replay cache: atomic check-and-insert, entries forgotten after `retention`.
class NonceCache {
 public:
  explicit NonceCache(TimePoint retention_seconds = 2 * kDefaultSkewSeconds)
      : retention_(retention_seconds) {}

  /// Records the nonce and returns true if it was not seen within the retention window.
  bool check_and_insert(std::uint64_t nonce, TimePoint now);
  std::size_t size() const;

 private:
  void prune(TimePoint now);

  mutable std::mutex mu_;
  TimePoint retention_;
  std::unordered_map<std::uint64_t, TimePoint> seen_;
  std::deque<std::pair<TimePoint, std::uint64_t>> order_;
};

enum class Freshness { accept, stale_timestamp, replayed_nonce };

Freshness check_freshness(const Envelope& env, TimePoint now, NonceCache& seen,
                          TimePoint skew_seconds = kDefaultSkewSeconds);

/// Response envelope: nonce = request nonce + 1 (mod 2^64).
Envelope respond(const Envelope& request, MsgType response_type, Bytes body, TimePoint now);

}  // namespace vpki::wire
