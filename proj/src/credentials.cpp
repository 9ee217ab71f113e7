#include "vpki/credentials.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "vpki/errors.hpp"

namespace vpki {

void check_ca_id(const CaId& id) {
  if (id.empty() || id.size() > kMaxCaIdBytes)
    throw Error(ErrorCode::invalid_argument, "CaId must be 1..64 bytes");
}

Interval Interval::make(TimePoint start, TimePoint end) {
  if (!(start < end)) throw Error(ErrorCode::invalid_argument, "interval start must precede end");
  return Interval{start, end};
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::rca: return "RCA";
    case Role::ltca: return "LTCA";
    case Role::pca: return "PCA";
    case Role::ra: return "RA";
    case Role::directory: return "DIRECTORY";
  }
  return "?";
}

Role role_from_string(std::string_view s) {
  for (auto r : {Role::rca, Role::ltca, Role::pca, Role::ra, Role::directory})
    if (to_string(r) == s) return r;
  throw Error(ErrorCode::invalid_argument, "unknown role: " + std::string(s));
}

namespace {

Role decode_role(Reader& r) {
  auto v = r.u8();
  if (v < 1 || v > 5) throw Error(ErrorCode::decode_error, "role out of range");
  return static_cast<Role>(v);
}

CaId decode_ca_id(Reader& r) {
  auto id = r.str();
  if (id.empty() || id.size() > kMaxCaIdBytes) throw Error(ErrorCode::decode_error, "bad CaId");
  return id;
}

void encode_body(Writer& w, const CaCertificate& v) {
  w.str(v.ca_id);
  w.u8(static_cast<std::uint8_t>(v.role));
  w.str(v.domain);
  encode(w, v.public_key);
  encode(w, v.validity);
  w.str(v.issuer);
}

void encode_body(Writer& w, const LongTermCertificate& v) {
  w.u64(v.serial);
  w.str(v.subject_id);
  encode(w, v.public_key);
  encode(w, v.validity);
  w.str(v.issuer);
}

void encode_body(Writer& w, const Ticket& v) {
  w.u64(v.serial);
  encode(w, v.target_digest);
  encode(w, v.interval);
  w.i64(v.tkt_expiry);
  w.str(v.issuer);
}

void encode_body(Writer& w, const Pseudonym& v) {
  w.u64(v.serial);
  encode(w, v.public_key);
  encode(w, v.interval);
  w.str(v.issuer);
}

void encode_body(Writer& w, const RevocationList& v) {
  w.str(v.issuer);
  w.u64(v.sequence);
  w.i64(v.issued_at);
  w.boolean(v.is_delta);
  w.u64(v.base_sequence);
  w.count(v.entries.size());
  for (auto e : v.entries) w.u64(e);
}

template <class T>
Bytes body_bytes(const T& v) {
  Writer w;
  encode_body(w, v);
  return std::move(w).take();
}

}  // namespace

void encode(Writer& w, const Interval& v) {
  w.i64(v.start);
  w.i64(v.end);
}
void encode(Writer& w, const PublicKey& v) { w.bytes(v.bytes); }
void encode(Writer& w, const Signature& v) { w.bytes(v.bytes); }
void encode(Writer& w, const Digest256& v) { w.fixed(v.bytes); }
void encode(Writer& w, const Rnd256& v) { w.fixed(v.bytes); }

void encode(Writer& w, const CaCertificate& v) {
  encode_body(w, v);
  encode(w, v.signature);
}
void encode(Writer& w, const LongTermCertificate& v) {
  encode_body(w, v);
  encode(w, v.signature);
}
void encode(Writer& w, const Ticket& v) {
  encode_body(w, v);
  encode(w, v.signature);
}
void encode(Writer& w, const Pseudonym& v) {
  encode_body(w, v);
  encode(w, v.signature);
}
void encode(Writer& w, const Csr& v) {
  encode(w, v.public_key);
  encode(w, v.pop_signature);
}
void encode(Writer& w, const RevocationList& v) {
  encode_body(w, v);
  encode(w, v.signature);
}

void decode(Reader& r, Interval& v) {
  v.start = r.i64();
  v.end = r.i64();
  if (!(v.start < v.end)) throw Error(ErrorCode::decode_error, "interval start must precede end");
}
void decode(Reader& r, PublicKey& v) { v.bytes = r.bytes(); }
void decode(Reader& r, Signature& v) { v.bytes = r.bytes(); }
void decode(Reader& r, Digest256& v) { v.bytes = r.fixed<32>(); }
void decode(Reader& r, Rnd256& v) { v.bytes = r.fixed<32>(); }

void decode(Reader& r, CaCertificate& v) {
  v.ca_id = decode_ca_id(r);
  v.role = decode_role(r);
  v.domain = r.str();
  decode(r, v.public_key);
  decode(r, v.validity);
  v.issuer = decode_ca_id(r);
  decode(r, v.signature);
}

void decode(Reader& r, LongTermCertificate& v) {
  v.serial = r.u64();
  v.subject_id = r.str();
  decode(r, v.public_key);
  decode(r, v.validity);
  v.issuer = decode_ca_id(r);
  decode(r, v.signature);
}

void decode(Reader& r, Ticket& v) {
  v.serial = r.u64();
  decode(r, v.target_digest);
  decode(r, v.interval);
  v.tkt_expiry = r.i64();
  if (v.tkt_expiry < v.interval.end) throw Error(ErrorCode::decode_error, "ticket expiry before interval end");
  v.issuer = decode_ca_id(r);
  decode(r, v.signature);
}

void decode(Reader& r, Pseudonym& v) {
  v.serial = r.u64();
  decode(r, v.public_key);
  decode(r, v.interval);
  v.issuer = decode_ca_id(r);
  decode(r, v.signature);
}

void decode(Reader& r, Csr& v) {
  decode(r, v.public_key);
  decode(r, v.pop_signature);
}

void decode(Reader& r, RevocationList& v) {
  v.issuer = decode_ca_id(r);
  v.sequence = r.u64();
  v.issued_at = r.i64();
  v.is_delta = r.boolean();
  v.base_sequence = r.u64();
  auto n = r.count(8);
  v.entries.resize(n);
  for (auto& e : v.entries) e = r.u64();
  for (std::size_t i = 1; i < v.entries.size(); ++i)
    if (v.entries[i - 1] >= v.entries[i]) throw Error(ErrorCode::decode_error, "CRL entries not sorted/unique");
  decode(r, v.signature);
}

Bytes signed_portion(const CaCertificate& v) { return body_bytes(v); }
Bytes signed_portion(const LongTermCertificate& v) { return body_bytes(v); }
Bytes signed_portion(const Ticket& v) { return body_bytes(v); }
Bytes signed_portion(const Pseudonym& v) { return body_bytes(v); }
Bytes signed_portion(const RevocationList& v) { return body_bytes(v); }

Bytes tagged(const TypeTag& tag, ByteView body) {
  Bytes out(tag.begin(), tag.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

ByteView untag(const TypeTag& tag, ByteView bytes) {
  if (bytes.size() < tag.size() || !std::equal(tag.begin(), tag.end(), bytes.begin()))
    throw Error(ErrorCode::decode_error, "file type tag mismatch");
  return bytes.subspan(tag.size());
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::io_error, "short write to " + path);
}

// --- trust store --------------------------------------------------------------

void TrustStore::add_root(const CaCertificate& cert) {
  check_ca_id(cert.ca_id);
  if (cert.role != Role::rca || cert.issuer != cert.ca_id)
    throw Error(ErrorCode::invalid_argument, "root must be a self-issued RCA certificate");
  if (!crypto::verify(cert.public_key, signed_portion(cert), cert.signature))
    throw Error(ErrorCode::bad_signature, "root self-signature");
  entries_[cert.ca_id] = TrustEntry{cert.public_key, Role::rca, cert.domain, std::nullopt};
  certs_.push_back(cert);
}

void TrustStore::add(const CaCertificate& cert) {
  if (cert.role == Role::rca && cert.issuer == cert.ca_id) {
    add_root(cert);
    return;
  }
  check_ca_id(cert.ca_id);
  const auto* parent = find(cert.issuer);
  if (parent == nullptr) throw Error(ErrorCode::unknown_issuer, cert.issuer);
  if (parent->role != Role::rca) throw Error(ErrorCode::unknown_issuer, "parent is not an RCA");
  if (!crypto::verify(parent->public_key, signed_portion(cert), cert.signature))
    throw Error(ErrorCode::bad_signature, "certificate of " + cert.ca_id);
  entries_[cert.ca_id] = TrustEntry{cert.public_key, cert.role, cert.domain, cert.issuer};
  std::erase_if(certs_, [&](const CaCertificate& c) { return c.ca_id == cert.ca_id; });
  certs_.push_back(cert);
}

const TrustEntry* TrustStore::find(const CaId& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<CaId> TrustStore::ids_with_role(Role role) const {
  std::vector<CaId> out;
  for (const auto& [id, e] : entries_)
    if (e.role == role) out.push_back(id);
  return out;
}

Bytes TrustStore::encode_file() const {
  Writer w;
  w.count(certs_.size());
  for (const auto& c : certs_) encode(w, c);
  return tagged(kTrustStoreTag, w.data());
}

TrustStore TrustStore::decode_file(ByteView bytes) {
  Reader r(untag(kTrustStoreTag, bytes));
  std::vector<CaCertificate> certs;
  decode_seq(r, certs);
  r.expect_end();
  TrustStore ts;
  // Roots first, then the rest; order inside the file is not significant.
  for (const auto& c : certs)
    if (c.role == Role::rca && c.issuer == c.ca_id) ts.add_root(c);
  for (const auto& c : certs)
    if (!(c.role == Role::rca && c.issuer == c.ca_id)) ts.add(c);
  return ts;
}

CaCertificate make_root_certificate(const CaId& id, const KeyPair& keys, Interval validity) {
  CaCertificate c{id, Role::rca, "root", keys.public_key, validity, id, {}};
  sign_in_place(c, keys.private_key);
  return c;
}

CaCertificate issue_ca_certificate(const CaId& id, Role role, const std::string& domain,
                                   const PublicKey& subject_key, Interval validity, const CaId& issuer,
                                   const crypto::PrivateKey& issuer_key) {
  check_ca_id(id);
  CaCertificate c{id, role, domain, subject_key, validity, issuer, {}};
  sign_in_place(c, issuer_key);
  return c;
}

// --- validation -----------------------------------------------------------------

std::string_view to_string(ValidationResult r) {
  switch (r) {
    case ValidationResult::valid: return "valid";
    case ValidationResult::expired: return "expired";
    case ValidationResult::not_yet_valid: return "not_yet_valid";
    case ValidationResult::unknown_issuer: return "unknown_issuer";
    case ValidationResult::bad_signature: return "bad_signature";
  }
  return "?";
}

namespace {

template <class T>
ValidationResult check_issuer_and_signature(const T& cred, const TrustStore& trust, Role issuer_role) {
  const auto* issuer = trust.find(cred.issuer);
  if (issuer == nullptr || issuer->role != issuer_role) return ValidationResult::unknown_issuer;
  if (!crypto::verify(issuer->public_key, signed_portion(cred), cred.signature))
    return ValidationResult::bad_signature;
  return ValidationResult::valid;
}

ValidationResult check_window(const Interval& validity, TimePoint now) {
  if (now < validity.start) return ValidationResult::not_yet_valid;
  if (now >= validity.end) return ValidationResult::expired;
  return ValidationResult::valid;
}

}  // namespace

ValidationResult validate_chain(const LongTermCertificate& cert, const TrustStore& trust, TimePoint now) {
  auto r = check_issuer_and_signature(cert, trust, Role::ltca);
  return r != ValidationResult::valid ? r : check_window(cert.validity, now);
}

ValidationResult validate_chain(const Ticket& ticket, const TrustStore& trust, TimePoint now) {
  auto r = check_issuer_and_signature(ticket, trust, Role::ltca);
  if (r != ValidationResult::valid) return r;
  return now > ticket.tkt_expiry ? ValidationResult::expired : ValidationResult::valid;
}

ValidationResult validate_chain(const Pseudonym& pseudonym, const TrustStore& trust, TimePoint now) {
  auto r = check_issuer_and_signature(pseudonym, trust, Role::pca);
  return r != ValidationResult::valid ? r : check_window(pseudonym.interval, now);
}

Csr make_csr(const KeyPair& kp) {
  Csr csr;
  csr.public_key = kp.public_key;
  csr.pop_signature = crypto::sign(kp.private_key, canonical_encode(kp.public_key));
  return csr;
}

bool verify_pop(const Csr& csr) {
  return crypto::verify(csr.public_key, canonical_encode(csr.public_key), csr.pop_signature);
}

}  // namespace vpki
