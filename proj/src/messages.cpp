#include "vpki/messages.hpp"

namespace vpki::msg {

namespace {

template <class T>
void encode_opt(Writer& w, const std::optional<T>& v) {
  w.boolean(v.has_value());
  if (v) encode(w, *v);
}

template <class T>
void decode_opt(Reader& r, std::optional<T>& v) {
  if (r.boolean()) {
    T item{};
    decode(r, item);
    v = std::move(item);
  } else {
    v.reset();
  }
}

CaId read_ca_id(Reader& r) {
  auto id = r.str();
  if (id.size() > kMaxCaIdBytes) throw Error(ErrorCode::decode_error, "CaId too long");
  return id;
}

}  // namespace

Bytes request_binding(std::uint16_t msg_type, std::uint64_t nonce, TimePoint timestamp, ByteView body) {
  Writer w;
  w.str("vpki-request");
  w.u16(msg_type);
  w.u64(nonce);
  w.i64(timestamp);
  w.bytes(body);
  return std::move(w).take();
}

Bytes response_binding(std::uint16_t msg_type, std::uint64_t nonce, TimePoint timestamp,
                       const CaId& responder, ByteView body) {
  Writer w;
  w.str("vpki-response");
  w.u16(msg_type);
  w.u64(nonce);
  w.i64(timestamp);
  w.str(responder);
  w.bytes(body);
  return std::move(w).take();
}

std::string_view to_string(OcspStatus s) {
  switch (s) {
    case OcspStatus::good: return "good";
    case OcspStatus::revoked: return "revoked";
    case OcspStatus::unknown: return "unknown";
  }
  return "?";
}

void encode(Writer& w, const SignedRequest& v) {
  w.bytes(v.body);
  vpki::encode(w, v.signature);
}
void decode(Reader& r, SignedRequest& v) {
  v.body = r.bytes();
  vpki::decode(r, v.signature);
}

void encode(Writer& w, const SignedResponse& v) {
  w.str(v.responder);
  w.bytes(v.body);
  vpki::encode(w, v.signature);
}
void decode(Reader& r, SignedResponse& v) {
  v.responder = read_ca_id(r);
  v.body = r.bytes();
  vpki::decode(r, v.signature);
}

void encode(Writer& w, const ErrorBody& v) {
  w.u16(static_cast<std::uint16_t>(v.code));
  w.str(v.detail);
}
void decode(Reader& r, ErrorBody& v) {
  v.code = static_cast<ErrorCode>(r.u16());
  v.detail = r.str();
}

void encode(Writer& w, const TicketRequest& v) {
  vpki::encode(w, v.target_digest);
  vpki::encode(w, v.interval);
  vpki::encode(w, v.ltc);
}
void decode(Reader& r, TicketRequest& v) {
  vpki::decode(r, v.target_digest);
  vpki::decode(r, v.interval);
  vpki::decode(r, v.ltc);
}

void encode(Writer& w, const TicketResponse& v) { vpki::encode(w, v.ticket); }
void decode(Reader& r, TicketResponse& v) { vpki::decode(r, v.ticket); }

void encode(Writer& w, const PseudonymRequest& v) {
  vpki::encode(w, v.rnd);
  vpki::encode(w, v.interval);
  vpki::encode(w, v.ticket);
  encode_seq(w, v.csrs);
}
void decode(Reader& r, PseudonymRequest& v) {
  vpki::decode(r, v.rnd);
  vpki::decode(r, v.interval);
  vpki::decode(r, v.ticket);
  decode_seq(r, v.csrs, 8);
}

void encode(Writer& w, const PseudonymItem& v) {
  w.u16(static_cast<std::uint16_t>(v.status));
  encode_opt(w, v.pseudonym);
}
void decode(Reader& r, PseudonymItem& v) {
  v.status = static_cast<ErrorCode>(r.u16());
  decode_opt(r, v.pseudonym);
}

void encode(Writer& w, const PseudonymResponse& v) { encode_seq(w, v.items); }
void decode(Reader& r, PseudonymResponse& v) { decode_seq(r, v.items, 3); }

void encode(Writer& w, const ForeignExchangeRequest& v) {
  vpki::encode(w, v.foreign_ticket);
  vpki::encode(w, v.rnd);
  vpki::encode(w, v.target_digest);
  vpki::encode(w, v.interval);
}
void decode(Reader& r, ForeignExchangeRequest& v) {
  vpki::decode(r, v.foreign_ticket);
  vpki::decode(r, v.rnd);
  vpki::decode(r, v.target_digest);
  vpki::decode(r, v.interval);
}

void encode(Writer& w, const CrlRequest& v) {
  w.boolean(v.since_sequence.has_value());
  w.u64(v.since_sequence.value_or(0));
}
void decode(Reader& r, CrlRequest& v) {
  bool has = r.boolean();
  auto seq = r.u64();
  v.since_sequence = has ? std::optional<std::uint64_t>(seq) : std::nullopt;
}

void encode(Writer& w, const CrlResponse& v) { vpki::encode(w, v.crl); }
void decode(Reader& r, CrlResponse& v) { vpki::decode(r, v.crl); }

void encode(Writer& w, const OcspRequest& v) {
  w.u64(v.query_serial);
  vpki::encode(w, v.requester);
}
void decode(Reader& r, OcspRequest& v) {
  v.query_serial = r.u64();
  vpki::decode(r, v.requester);
}

void encode(Writer& w, const OcspResponse& v) {
  w.u64(v.query_serial);
  w.u8(static_cast<std::uint8_t>(v.status));
  w.i64(v.produced_at);
}
void decode(Reader& r, OcspResponse& v) {
  v.query_serial = r.u64();
  auto s = r.u8();
  if (s > 2) throw Error(ErrorCode::decode_error, "bad OCSP status");
  v.status = static_cast<OcspStatus>(s);
  v.produced_at = r.i64();
}

void encode(Writer& w, const ResolveMapRequest& v) {
  w.str(v.ra_id);
  w.u64(v.pseudonym_serial);
  w.boolean(v.revoke);
}
void decode(Reader& r, ResolveMapRequest& v) {
  v.ra_id = read_ca_id(r);
  v.pseudonym_serial = r.u64();
  v.revoke = r.boolean();
}

void encode(Writer& w, const ResolveMapResponse& v) {
  w.str(v.ticket_issuer);
  w.u64(v.ticket_serial);
  w.u64(v.revoked_count);
}
void decode(Reader& r, ResolveMapResponse& v) {
  v.ticket_issuer = read_ca_id(r);
  v.ticket_serial = r.u64();
  v.revoked_count = r.u64();
}

void encode(Writer& w, const ResolveTicketRequest& v) {
  w.str(v.ra_id);
  w.u64(v.ticket_serial);
  w.boolean(v.revoke_ltc);
}
void decode(Reader& r, ResolveTicketRequest& v) {
  v.ra_id = read_ca_id(r);
  v.ticket_serial = r.u64();
  v.revoke_ltc = r.boolean();
}

void encode(Writer& w, const ResolveTicketResponse& v) {
  w.boolean(v.is_foreign);
  w.str(v.subject_id);
  w.str(v.home_ltca);
  w.u64(v.foreign_ticket_serial);
  w.boolean(v.ltc_revoked);
}
void decode(Reader& r, ResolveTicketResponse& v) {
  v.is_foreign = r.boolean();
  v.subject_id = r.str();
  v.home_ltca = read_ca_id(r);
  v.foreign_ticket_serial = r.u64();
  v.ltc_revoked = r.boolean();
}

void encode(Writer& w, const ResolveRequest& v) {
  w.str(v.pseudonym_issuer);
  w.u64(v.pseudonym_serial);
  w.str(v.justification);
  w.boolean(v.revoke_pseudonyms);
  w.boolean(v.revoke_ltc);
}
void decode(Reader& r, ResolveRequest& v) {
  v.pseudonym_issuer = read_ca_id(r);
  v.pseudonym_serial = r.u64();
  v.justification = r.str();
  v.revoke_pseudonyms = r.boolean();
  v.revoke_ltc = r.boolean();
}

void encode(Writer& w, const ResolveResponse& v) {
  w.boolean(v.complete);
  w.str(v.subject_id);
  w.str(v.home_ltca);
  w.u64(v.ticket_serial);
  w.str(v.ticket_issuer);
  w.u64(v.foreign_ticket_serial);
  w.u64(v.revoked_pseudonyms);
  w.boolean(v.ltc_revoked);
}
void decode(Reader& r, ResolveResponse& v) {
  v.complete = r.boolean();
  v.subject_id = r.str();
  v.home_ltca = read_ca_id(r);
  v.ticket_serial = r.u64();
  v.ticket_issuer = read_ca_id(r);
  v.foreign_ticket_serial = r.u64();
  v.revoked_pseudonyms = r.u64();
  v.ltc_revoked = r.boolean();
}

void encode(Writer& w, const DirectoryEntry& v) {
  w.str(v.ca_id);
  w.u8(static_cast<std::uint8_t>(v.role));
  w.bytes(v.certificate);
  w.str(v.domain);
  w.count(v.associations.size());
  for (const auto& a : v.associations) w.str(a);
  w.str(v.address);
}
void decode(Reader& r, DirectoryEntry& v) {
  v.ca_id = read_ca_id(r);
  auto role = r.u8();
  if (role < 1 || role > 5) throw Error(ErrorCode::decode_error, "bad role");
  v.role = static_cast<Role>(role);
  v.certificate = r.bytes();
  v.domain = r.str();
  auto n = r.count(4);
  v.associations.resize(n);
  for (auto& a : v.associations) a = read_ca_id(r);
  v.address = r.str();
}

void encode(Writer& w, const DirectoryRequest& v) {
  w.u8(static_cast<std::uint8_t>(v.kind));
  w.str(v.ca_id);
  w.str(v.domain);
  w.u8(v.role ? static_cast<std::uint8_t>(*v.role) : 0);
}
void decode(Reader& r, DirectoryRequest& v) {
  auto kind = r.u8();
  if (kind > 1) throw Error(ErrorCode::decode_error, "bad directory request kind");
  v.kind = static_cast<DirectoryRequest::Kind>(kind);
  v.ca_id = read_ca_id(r);
  v.domain = r.str();
  auto role = r.u8();
  if (role > 5) throw Error(ErrorCode::decode_error, "bad role");
  v.role = role == 0 ? std::nullopt : std::optional<Role>(static_cast<Role>(role));
}

void encode(Writer& w, const DirectoryResponse& v) { encode_seq(w, v.entries); }
void decode(Reader& r, DirectoryResponse& v) { decode_seq(r, v.entries, 8); }

void encode(Writer& w, const RegisterRequest& v) {
  vpki::encode(w, v.csr);
  w.str(v.subject_id);
  vpki::encode(w, v.validity);
}
void decode(Reader& r, RegisterRequest& v) {
  vpki::decode(r, v.csr);
  v.subject_id = r.str();
  vpki::decode(r, v.validity);
}

void encode(Writer& w, const LtcUpdateRequest& v) {
  vpki::encode(w, v.old_ltc);
  vpki::encode(w, v.csr);
}
void decode(Reader& r, LtcUpdateRequest& v) {
  vpki::decode(r, v.old_ltc);
  vpki::decode(r, v.csr);
}

void encode(Writer& w, const LtcResponse& v) { vpki::encode(w, v.ltc); }
void decode(Reader& r, LtcResponse& v) { vpki::decode(r, v.ltc); }

}  // namespace vpki::msg
