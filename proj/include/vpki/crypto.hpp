#pragma once

#include <array>
#include <compare>
#include <memory>
#include <optional>
#include <string_view>

#include "vpki/bytes.hpp"

namespace vpki::crypto {

inline constexpr std::size_t kPublicKeyBytes = 65;   // uncompressed SEC1 point, P-256
inline constexpr std::size_t kScalarBytes = 32;
inline constexpr std::size_t kSignatureBytes = 64;   // r || s

using Seed = std::array<std::uint8_t, 32>;

struct Digest256 {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const Digest256&) const = default;
};

struct Rnd256 {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const Rnd256&) const = default;

  /// Fresh CSPRNG output.
  static Rnd256 random();
};

struct PublicKey {
  Bytes bytes;
  auto operator<=>(const PublicKey&) const = default;
};

struct Signature {
  Bytes bytes;
  auto operator<=>(const Signature&) const = default;
};

/// Secret scalar with a cached OpenSSL key object. Has no canonical
/// encoding; `export_scalar` exists only for server key files.
class PrivateKey {
 public:
  PrivateKey();
  ~PrivateKey();
  PrivateKey(const PrivateKey&);
  PrivateKey& operator=(const PrivateKey&);
  PrivateKey(PrivateKey&&) noexcept;
  PrivateKey& operator=(PrivateKey&&) noexcept;

  static PrivateKey from_scalar(ByteView scalar);
  Bytes export_scalar() const;
  PublicKey derive_public() const;
  bool empty() const { return impl_ == nullptr; }

  struct Impl;  // opaque, defined in crypto.cpp

 private:
  std::shared_ptr<const Impl> impl_;
  friend Signature sign(const PrivateKey&, ByteView);
  friend PrivateKey make_private(std::shared_ptr<const Impl>);
};

struct KeyPair {
  PublicKey public_key;
  PrivateKey private_key;
};

/// ECDSA P-256 key generation. A seed makes the result deterministic; seeded
/// generation is for tests and simulations only and is NOT safe for
/// production keys.
KeyPair generate_keypair(std::optional<Seed> seed = std::nullopt);

/// ECDSA over SHA-256(msg).
Signature sign(const PrivateKey& key, ByteView msg);

/// Never throws; malformed keys or signatures simply fail verification.
bool verify(const PublicKey& key, ByteView msg, const Signature& sig) noexcept;

Digest256 sha256(ByteView data);

void random_bytes(std::span<std::uint8_t> out);
std::uint64_t random_u64();

/// SHA-256 over canonical-encode(ca_id) || rnd: the commitment a ticket
/// carries to its hidden target authority.
Digest256 hash_bind(std::string_view ca_id, const Rnd256& rnd);

}  // namespace vpki::crypto
