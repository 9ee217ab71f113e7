#include "vpki/errors.hpp"

namespace vpki {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok: return "Ok";
    case ErrorCode::decode_error: return "DecodeError";
    case ErrorCode::frame_error: return "FrameError";
    case ErrorCode::stale_timestamp: return "StaleTimestamp";
    case ErrorCode::replayed_nonce: return "ReplayedNonce";
    case ErrorCode::duplicate_subject: return "DuplicateSubject";
    case ErrorCode::bad_proof_of_possession: return "BadProofOfPossession";
    case ErrorCode::revoked_credential: return "RevokedCredential";
    case ErrorCode::unknown_subject: return "UnknownSubject";
    case ErrorCode::overlapping_ticket: return "OverlappingTicket";
    case ErrorCode::bad_signature: return "BadSignature";
    case ErrorCode::unknown_issuer: return "UnknownIssuer";
    case ErrorCode::ticket_binding_mismatch: return "TicketBindingMismatch";
    case ErrorCode::ticket_reused: return "TicketReused";
    case ErrorCode::interval_violation: return "IntervalViolation";
    case ErrorCode::unknown_ticket: return "UnknownTicket";
    case ErrorCode::unauthorized: return "Unauthorized";
    case ErrorCode::ticket_invalid: return "TicketInvalid";
    case ErrorCode::malicious_requester: return "MaliciousRequester";
    case ErrorCode::no_slot: return "NoSlot";
    case ErrorCode::empty_request: return "EmptyRequest";
    case ErrorCode::unknown_pseudonym: return "UnknownPseudonym";
    case ErrorCode::not_found: return "NotFound";
    case ErrorCode::foreign_unreachable: return "ForeignUnreachable";
    case ErrorCode::response_invalid: return "ResponseInvalid";
    case ErrorCode::mismatched_response: return "MismatchedResponse";
    case ErrorCode::scenario_invalid: return "ScenarioInvalid";
    case ErrorCode::service_spawn_failure: return "ServiceSpawnFailure";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::missing_ground_truth: return "MissingGroundTruth";
    case ErrorCode::snapshot_missing: return "SnapshotMissing";
    case ErrorCode::transport_error: return "TransportError";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::expired: return "Expired";
    case ErrorCode::batch_too_large: return "BatchTooLarge";
    case ErrorCode::unsupported_message: return "UnsupportedMessage";
    case ErrorCode::internal: return "Internal";
  }
  return "Unknown";
}

namespace {
std::string compose(ErrorCode code, const std::string& detail) {
  std::string msg(to_string(code));
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(compose(code, detail)), code_(code), detail_(detail) {}

}  // namespace vpki
