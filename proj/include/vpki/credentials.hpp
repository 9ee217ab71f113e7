#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vpki/bytes.hpp"
#include "vpki/crypto.hpp"
#include "vpki/encoding.hpp"

namespace vpki {

using crypto::Digest256;
using crypto::KeyPair;
using crypto::PublicKey;
using crypto::Rnd256;
using crypto::Signature;

/// Authority identifier: nonempty UTF-8, at most 64 bytes.
using CaId = std::string;
inline constexpr std::size_t kMaxCaIdBytes = 64;
void check_ca_id(const CaId& id);

/// Half-open [start, end). Construction through `make` enforces start < end.
struct Interval {
  TimePoint start = 0;
  TimePoint end = 0;

  static Interval make(TimePoint start, TimePoint end);

  bool contains(TimePoint t) const { return start <= t && t < end; }
  bool overlaps(const Interval& o) const { return start < o.end && o.start < end; }
  bool within(const Interval& outer) const { return outer.start <= start && end <= outer.end; }
  TimePoint length() const { return end - start; }

  auto operator<=>(const Interval&) const = default;
};

enum class Role : std::uint8_t { rca = 1, ltca = 2, pca = 3, ra = 4, directory = 5 };
std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

/// Authority certificate, issued by its parent (the RCA) or self-signed for an RCA.
struct CaCertificate {
  CaId ca_id;
  Role role = Role::rca;
  std::string domain;
  PublicKey public_key;
  Interval validity;
  CaId issuer;
  Signature signature;

  bool operator==(const CaCertificate&) const = default;
};

struct LongTermCertificate {
  SerialNumber serial = 0;
  std::string subject_id;
  PublicKey public_key;
  Interval validity;
  CaId issuer;
  Signature signature;

  bool operator==(const LongTermCertificate&) const = default;
};

/// Anonymized authorization. Carries no subject field: only a commitment to
/// the target authority and the grid-aligned coverage interval.
struct Ticket {
  SerialNumber serial = 0;
  Digest256 target_digest;
  Interval interval;
  TimePoint tkt_expiry = 0;
  CaId issuer;
  Signature signature;

  bool operator==(const Ticket&) const = default;
};

struct Pseudonym {
  SerialNumber serial = 0;
  PublicKey public_key;
  Interval interval;
  CaId issuer;
  Signature signature;

  bool operator==(const Pseudonym&) const = default;
};

/// Public key with a self-signature over its canonical encoding (proof of possession).
struct Csr {
  PublicKey public_key;
  Signature pop_signature;

  bool operator==(const Csr&) const = default;
};

struct RevocationList {
  CaId issuer;
  std::uint64_t sequence = 0;
  TimePoint issued_at = 0;
  /// Delta lists carry only the entries added after `base_sequence`.
  bool is_delta = false;
  std::uint64_t base_sequence = 0;
  std::vector<SerialNumber> entries;  // sorted ascending, unique
  Signature signature;

  bool operator==(const RevocationList&) const = default;
};

// --- canonical encoding -------------------------------------------------

void encode(Writer& w, const Interval& v);
void encode(Writer& w, const PublicKey& v);
void encode(Writer& w, const Signature& v);
void encode(Writer& w, const Digest256& v);
void encode(Writer& w, const Rnd256& v);
void encode(Writer& w, const CaCertificate& v);
void encode(Writer& w, const LongTermCertificate& v);
void encode(Writer& w, const Ticket& v);
void encode(Writer& w, const Pseudonym& v);
void encode(Writer& w, const Csr& v);
void encode(Writer& w, const RevocationList& v);

void decode(Reader& r, Interval& v);
void decode(Reader& r, PublicKey& v);
void decode(Reader& r, Signature& v);
void decode(Reader& r, Digest256& v);
void decode(Reader& r, Rnd256& v);
void decode(Reader& r, CaCertificate& v);
void decode(Reader& r, LongTermCertificate& v);
void decode(Reader& r, Ticket& v);
void decode(Reader& r, Pseudonym& v);
void decode(Reader& r, Csr& v);
void decode(Reader& r, RevocationList& v);

/// Bytes covered by the issuer signature: every field before `signature`.
Bytes signed_portion(const CaCertificate& v);
Bytes signed_portion(const LongTermCertificate& v);
Bytes signed_portion(const Ticket& v);
Bytes signed_portion(const Pseudonym& v);
Bytes signed_portion(const RevocationList& v);

template <class T>
Bytes canonical_encode(const T& value) {
  Writer w;
  encode(w, value);
  return std::move(w).take();
}

template <class T>
T canonical_decode(ByteView bytes) {
  Reader r(bytes);
  T out{};
  decode(r, out);
  r.expect_end();
  return out;
}

template <class T>
void encode_seq(Writer& w, const std::vector<T>& items) {
  w.count(items.size());
  for (const auto& item : items) encode(w, item);
}

template <class T>
void decode_seq(Reader& r, std::vector<T>& items, std::size_t min_element_size = 1) {
  auto n = r.count(min_element_size);
  items.clear();
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    T item{};
    decode(r, item);
    items.push_back(std::move(item));
  }
}

template <class T>
void sign_in_place(T& value, const crypto::PrivateKey& key) {
  value.signature = crypto::sign(key, signed_portion(value));
}

// --- credential files: 4-byte type tag + canonical encoding -----------------

using TypeTag = std::array<std::uint8_t, 4>;

template <class T>
struct FileTag;
template <>
struct FileTag<CaCertificate> {
  static constexpr TypeTag value{'C', 'A', 'C', '1'};
};
template <>
struct FileTag<LongTermCertificate> {
  static constexpr TypeTag value{'L', 'T', 'C', '1'};
};
template <>
struct FileTag<Ticket> {
  static constexpr TypeTag value{'T', 'K', 'T', '1'};
};
template <>
struct FileTag<Pseudonym> {
  static constexpr TypeTag value{'P', 'S', 'N', '1'};
};
template <>
struct FileTag<Csr> {
  static constexpr TypeTag value{'C', 'S', 'R', '1'};
};
template <>
struct FileTag<RevocationList> {
  static constexpr TypeTag value{'C', 'R', 'L', '1'};
};

Bytes tagged(const TypeTag& tag, ByteView body);
/// Strips and checks the tag; throws decode_error on mismatch.
ByteView untag(const TypeTag& tag, ByteView bytes);

template <class T>
Bytes encode_file(const T& value) {
  return tagged(FileTag<T>::value, canonical_encode(value));
}

template <class T>
T decode_file(ByteView bytes) {
  return canonical_decode<T>(untag(FileTag<T>::value, bytes));
}

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteView data);

// --- trust store -------------------------------------------------------------

struct TrustEntry {
  PublicKey public_key;
  Role role = Role::rca;
  std::string domain;
  std::optional<CaId> parent;
};

/// CaId -> key/role/parent. Every non-root entry is inserted only after its
/// certificate verifies under an already-present parent, so every chain
/// terminates at an RCA.
class TrustStore {
 public:
  void add_root(const CaCertificate& self_signed);
  void add(const CaCertificate& cert);

  const TrustEntry* find(const CaId& id) const;
  bool contains(const CaId& id) const { return find(id) != nullptr; }
  const std::vector<CaCertificate>& certificates() const { return certs_; }
  std::vector<CaId> ids_with_role(Role role) const;

  Bytes encode_file() const;
  static TrustStore decode_file(ByteView bytes);

 private:
  std::map<CaId, TrustEntry> entries_;
  std::vector<CaCertificate> certs_;
};

inline constexpr TypeTag kTrustStoreTag{'T', 'R', 'S', '1'};

CaCertificate make_root_certificate(const CaId& id, const KeyPair& keys, Interval validity);
CaCertificate issue_ca_certificate(const CaId& id, Role role, const std::string& domain,
                                   const PublicKey& subject_key, Interval validity, const CaId& issuer,
                                   const crypto::PrivateKey& issuer_key);

// --- validation --------------------------------------------------------------

enum class ValidationResult { valid, expired, not_yet_valid, unknown_issuer, bad_signature };
std::string_view to_string(ValidationResult r);

/// Issuer must be present in `trust` with the role that issues this kind of
/// credential. Tickets have no not-yet-valid state: `tkt_expiry` bounds
/// presentation, the interval is the pseudonym coverage period.
ValidationResult validate_chain(const LongTermCertificate& cert, const TrustStore& trust, TimePoint now);
ValidationResult validate_chain(const Ticket& ticket, const TrustStore& trust, TimePoint now);
ValidationResult validate_chain(const Pseudonym& pseudonym, const TrustStore& trust, TimePoint now);

Csr make_csr(const KeyPair& kp);
bool verify_pop(const Csr& csr);

}  // namespace vpki
