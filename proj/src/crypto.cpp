#define OPENSSL_SUPPRESS_DEPRECATED
#include "vpki/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/ecdsa.h>
#include <openssl/obj_mac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>

#include "vpki/encoding.hpp"
#include "vpki/errors.hpp"

namespace vpki::crypto {

namespace {

const EC_GROUP* curve() {
  static const EC_GROUP* group = [] {
    EC_GROUP* g = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
    if (g == nullptr) throw Error(ErrorCode::internal, "P-256 unavailable");
    return g;
  }();
  return group;
}

struct BnDeleter {
  void operator()(BIGNUM* p) const { BN_clear_free(p); }
};
struct PointDeleter {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
struct KeyDeleter {
  void operator()(EC_KEY* p) const { EC_KEY_free(p); }
};
struct SigDeleter {
  void operator()(ECDSA_SIG* p) const { ECDSA_SIG_free(p); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using PointPtr = std::unique_ptr<EC_POINT, PointDeleter>;
using KeyPtr = std::unique_ptr<EC_KEY, KeyDeleter>;
using SigPtr = std::unique_ptr<ECDSA_SIG, SigDeleter>;

Bytes point_to_bytes(const EC_POINT* point) {
  Bytes out(kPublicKeyBytes);
  auto n = EC_POINT_point2oct(curve(), point, POINT_CONVERSION_UNCOMPRESSED, out.data(), out.size(),
                              nullptr);
  if (n != kPublicKeyBytes) throw Error(ErrorCode::internal, "point encoding failed");
  return out;
}

}  // namespace

struct PrivateKey::Impl {
  KeyPtr key;
  PublicKey public_key;
};

PrivateKey make_private(std::shared_ptr<const PrivateKey::Impl> impl) {
  PrivateKey k;
  k.impl_ = std::move(impl);
  return k;
}

namespace {

std::shared_ptr<PrivateKey::Impl> impl_from_scalar(const BIGNUM* scalar) {
  KeyPtr key(EC_KEY_new());
  if (!key || EC_KEY_set_group(key.get(), curve()) != 1)
    throw Error(ErrorCode::internal, "EC_KEY allocation failed");
  PointPtr pub(EC_POINT_new(curve()));
  if (!pub || EC_POINT_mul(curve(), pub.get(), scalar, nullptr, nullptr, nullptr) != 1)
    throw Error(ErrorCode::internal, "scalar multiplication failed");
  if (EC_KEY_set_private_key(key.get(), scalar) != 1 || EC_KEY_set_public_key(key.get(), pub.get()) != 1)
    throw Error(ErrorCode::internal, "EC_KEY setup failed");
  auto impl = std::make_shared<PrivateKey::Impl>();
  impl->public_key.bytes = point_to_bytes(pub.get());
  impl->key = std::move(key);
  return impl;
}

const BIGNUM* order() {
  static const BIGNUM* n = EC_GROUP_get0_order(curve());
  return n;
}

}  // namespace

PrivateKey::PrivateKey() = default;
PrivateKey::~PrivateKey() = default;
PrivateKey::PrivateKey(const PrivateKey&) = default;
PrivateKey& PrivateKey::operator=(const PrivateKey&) = default;
PrivateKey::PrivateKey(PrivateKey&&) noexcept = default;
PrivateKey& PrivateKey::operator=(PrivateKey&&) noexcept = default;

PrivateKey PrivateKey::from_scalar(ByteView scalar) {
  if (scalar.size() != kScalarBytes) throw Error(ErrorCode::invalid_argument, "scalar must be 32 bytes");
  BnPtr d(BN_bin2bn(scalar.data(), static_cast<int>(scalar.size()), nullptr));
  if (!d || BN_is_zero(d.get()) || BN_cmp(d.get(), order()) >= 0)
    throw Error(ErrorCode::invalid_argument, "scalar out of range");
  return make_private(impl_from_scalar(d.get()));
}

Bytes PrivateKey::export_scalar() const {
  if (!impl_) throw Error(ErrorCode::invalid_argument, "empty private key");
  Bytes out(kScalarBytes);
  BN_bn2binpad(EC_KEY_get0_private_key(impl_->key.get()), out.data(), static_cast<int>(out.size()));
  return out;
}

PublicKey PrivateKey::derive_public() const {
  if (!impl_) throw Error(ErrorCode::invalid_argument, "empty private key");
  return impl_->public_key;
}

KeyPair generate_keypair(std::optional<Seed> seed) {
  std::shared_ptr<PrivateKey::Impl> impl;
  if (seed) {
    // Hash-and-retry derivation: scalar = SHA-256(seed || counter) until in [1, n-1].
    for (std::uint32_t counter = 0;; ++counter) {
      Writer w;
      w.fixed(*seed);
      w.u32(counter);
      auto h = sha256(w.data());
      BnPtr d(BN_bin2bn(h.bytes.data(), static_cast<int>(h.bytes.size()), nullptr));
      if (!BN_is_zero(d.get()) && BN_cmp(d.get(), order()) < 0) {
        impl = impl_from_scalar(d.get());
        break;
      }
    }
  } else {
    KeyPtr key(EC_KEY_new());
    if (!key || EC_KEY_set_group(key.get(), curve()) != 1 || EC_KEY_generate_key(key.get()) != 1)
      throw Error(ErrorCode::internal, "key generation failed");
    impl = std::make_shared<PrivateKey::Impl>();
    impl->public_key.bytes = point_to_bytes(EC_KEY_get0_public_key(key.get()));
    impl->key = std::move(key);
  }
  KeyPair kp;
  kp.public_key = impl->public_key;
  kp.private_key = make_private(std::move(impl));
  return kp;
}

Signature sign(const PrivateKey& key, ByteView msg) {
  if (!key.impl_) throw Error(ErrorCode::invalid_argument, "empty private key");
  auto digest = sha256(msg);
  SigPtr sig(ECDSA_do_sign(digest.bytes.data(), static_cast<int>(digest.bytes.size()),
                           const_cast<EC_KEY*>(key.impl_->key.get())));
  if (!sig) throw Error(ErrorCode::internal, "ECDSA signing failed");
  const BIGNUM* r = nullptr;
  const BIGNUM* s = nullptr;
  ECDSA_SIG_get0(sig.get(), &r, &s);
  Signature out;
  out.bytes.resize(kSignatureBytes);
  BN_bn2binpad(r, out.bytes.data(), 32);
  BN_bn2binpad(s, out.bytes.data() + 32, 32);
  return out;
}

bool verify(const PublicKey& key, ByteView msg, const Signature& sig) noexcept {
  if (key.bytes.size() != kPublicKeyBytes || sig.bytes.size() != kSignatureBytes) return false;
  try {
    PointPtr point(EC_POINT_new(curve()));
    if (!point ||
        EC_POINT_oct2point(curve(), point.get(), key.bytes.data(), key.bytes.size(), nullptr) != 1)
      return false;
    KeyPtr ec(EC_KEY_new());
    if (!ec || EC_KEY_set_group(ec.get(), curve()) != 1 || EC_KEY_set_public_key(ec.get(), point.get()) != 1)
      return false;
    SigPtr s(ECDSA_SIG_new());
    BIGNUM* r_bn = BN_bin2bn(sig.bytes.data(), 32, nullptr);
    BIGNUM* s_bn = BN_bin2bn(sig.bytes.data() + 32, 32, nullptr);
    if (!s || r_bn == nullptr || s_bn == nullptr || ECDSA_SIG_set0(s.get(), r_bn, s_bn) != 1) {
      BN_free(r_bn);
      BN_free(s_bn);
      return false;
    }
    auto digest = sha256(msg);
    return ECDSA_do_verify(digest.bytes.data(), static_cast<int>(digest.bytes.size()), s.get(), ec.get()) ==
           1;
  } catch (...) {
    return false;
  }
}

Digest256 sha256(ByteView data) {
  Digest256 out;
  SHA256(data.data(), data.size(), out.bytes.data());
  return out;
}

void random_bytes(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
    throw Error(ErrorCode::internal, "RAND_bytes failed");
}

std::uint64_t random_u64() {
  std::array<std::uint8_t, 8> b{};
  random_bytes(b);
  std::uint64_t v = 0;
  for (auto x : b) v = v << 8 | x;
  return v;
}

Rnd256 Rnd256::random() {
  Rnd256 r;
  random_bytes(r.bytes);
  return r;
}

Digest256 hash_bind(std::string_view ca_id, const Rnd256& rnd) {
  Writer w;
  w.str(ca_id);
  w.fixed(rnd.bytes);
  return sha256(w.data());
}

}  // namespace vpki::crypto
