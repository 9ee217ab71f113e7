#pragma once

// Request/response bodies carried in envelope payloads. Each body has a
// canonical encoding via encode()/decode() overloads.

#include <optional>
#include <string>
#include <vector>

#include "vpki/credentials.hpp"
#include "vpki/errors.hpp"
#include "vpki/wire.hpp"

namespace vpki::msg {

/// Requester-authenticated body. The signature covers the envelope header
/// fields together with the body (see `request_binding`).
struct SignedRequest {
  Bytes body;
  Signature signature;
};

/// Every response (errors included) is signed by the responding authority.
struct SignedResponse {
  CaId responder;
  Bytes body;
  Signature signature;
};

Bytes request_binding(std::uint16_t msg_type, std::uint64_t nonce, TimePoint timestamp, ByteView body);
Bytes response_binding(std::uint16_t msg_type, std::uint64_t nonce, TimePoint timestamp,
                       const CaId& responder, ByteView body);

struct ErrorBody {
  ErrorCode code = ErrorCode::internal;
  std::string detail;
};

/// V -> LTCA: H(target_id || Rnd), [t_s, t_e], LTC. Also used for foreign tickets.
struct TicketRequest {
  Digest256 target_digest;
  Interval interval;
  LongTermCertificate ltc;
};

struct TicketResponse {
  Ticket ticket;
};

/// V -> PCA: Rnd, [t'_s, t'_e], ticket, CSRs.
struct PseudonymRequest {
  Rnd256 rnd;
  Interval interval;
  Ticket ticket;
  std::vector<Csr> csrs;
};

struct PseudonymItem {
  ErrorCode status = ErrorCode::ok;
  std::optional<Pseudonym> pseudonym;
};

struct PseudonymResponse {
  std::vector<PseudonymItem> items;  // one per CSR, same order
};

/// V -> F-LTCA: foreign ticket opened with its Rnd, new commitment to a PCA.
struct ForeignExchangeRequest {
  Ticket foreign_ticket;
  Rnd256 rnd;
  Digest256 target_digest;
  Interval interval;
};

struct CrlRequest {
  std::optional<std::uint64_t> since_sequence;
};

struct CrlResponse {
  RevocationList crl;
};

enum class OcspStatus : std::uint8_t { good = 0, revoked = 1, unknown = 2 };
std::string_view to_string(OcspStatus s);

/// Sent inside a SignedRequest signed by the requester pseudonym's key.
struct OcspRequest {
  SerialNumber query_serial = 0;
  Pseudonym requester;
};

struct OcspResponse {
  SerialNumber query_serial = 0;
  OcspStatus status = OcspStatus::unknown;
  TimePoint produced_at = 0;
};

/// RA -> PCA (signed by the RA key).
struct ResolveMapRequest {
  CaId ra_id;
  SerialNumber pseudonym_serial = 0;
  bool revoke = false;
};

struct ResolveMapResponse {
  CaId ticket_issuer;
  SerialNumber ticket_serial = 0;
  std::uint64_t revoked_count = 0;
};

/// RA -> LTCA (signed by the RA key).
struct ResolveTicketRequest {
  CaId ra_id;
  SerialNumber ticket_serial = 0;
  bool revoke_ltc = false;
};

struct ResolveTicketResponse {
  bool is_foreign = false;
  std::string subject_id;            // native ticket
  CaId home_ltca;                    // exchanged ticket: where the f-tkt came from
  SerialNumber foreign_ticket_serial = 0;
  bool ltc_revoked = false;
};

/// Operator -> RA (signed by the operator key).
struct ResolveRequest {
  CaId pseudonym_issuer;
  SerialNumber pseudonym_serial = 0;
  std::string justification;
  bool revoke_pseudonyms = false;
  bool revoke_ltc = false;
};

struct ResolveResponse {
  bool complete = false;
  std::string subject_id;
  CaId home_ltca;
  SerialNumber ticket_serial = 0;
  CaId ticket_issuer;
  SerialNumber foreign_ticket_serial = 0;
  std::uint64_t revoked_pseudonyms = 0;
  bool ltc_revoked = false;
};

struct DirectoryEntry {
  CaId ca_id;
  Role role = Role::rca;
  Bytes certificate;  // encode_file(CaCertificate)
  std::string domain;
  std::vector<CaId> associations;
  std::string address;  // host:port, empty for in-process deployments

  bool operator==(const DirectoryEntry&) const = default;
};

struct DirectoryRequest {
  enum class Kind : std::uint8_t { lookup = 0, list = 1 };
  Kind kind = Kind::lookup;
  CaId ca_id;
  std::string domain;
  std::optional<Role> role;
};

struct DirectoryResponse {
  std::vector<DirectoryEntry> entries;
};

struct RegisterRequest {
  Csr csr;
  std::string subject_id;
  Interval validity;
};

/// Signed by the old LTC's key.
struct LtcUpdateRequest {
  LongTermCertificate old_ltc;
  Csr csr;
};

struct LtcResponse {
  LongTermCertificate ltc;
};

#define VPKI_DECLARE_CODEC(T)      \
  void encode(Writer& w, const T& v); \
  void decode(Reader& r, T& v);

VPKI_DECLARE_CODEC(SignedRequest)
VPKI_DECLARE_CODEC(SignedResponse)
VPKI_DECLARE_CODEC(ErrorBody)
VPKI_DECLARE_CODEC(TicketRequest)
VPKI_DECLARE_CODEC(TicketResponse)
VPKI_DECLARE_CODEC(PseudonymRequest)
VPKI_DECLARE_CODEC(PseudonymItem)
VPKI_DECLARE_CODEC(PseudonymResponse)
VPKI_DECLARE_CODEC(ForeignExchangeRequest)
VPKI_DECLARE_CODEC(CrlRequest)
VPKI_DECLARE_CODEC(CrlResponse)
VPKI_DECLARE_CODEC(OcspRequest)
VPKI_DECLARE_CODEC(OcspResponse)
VPKI_DECLARE_CODEC(ResolveMapRequest)
VPKI_DECLARE_CODEC(ResolveMapResponse)
VPKI_DECLARE_CODEC(ResolveTicketRequest)
VPKI_DECLARE_CODEC(ResolveTicketResponse)
VPKI_DECLARE_CODEC(ResolveRequest)
VPKI_DECLARE_CODEC(ResolveResponse)
VPKI_DECLARE_CODEC(DirectoryEntry)
VPKI_DECLARE_CODEC(DirectoryRequest)
VPKI_DECLARE_CODEC(DirectoryResponse)
VPKI_DECLARE_CODEC(RegisterRequest)
VPKI_DECLARE_CODEC(LtcUpdateRequest)
VPKI_DECLARE_CODEC(LtcResponse)

#undef VPKI_DECLARE_CODEC

}  // namespace vpki::msg

namespace vpki {
// Make the generic canonical_encode/canonical_decode templates find msg:: codecs.
using msg::decode;
using msg::encode;
}  // namespace vpki
