#pragma once

#include <map>
#include <optional>

#include "vpki/rpc.hpp"

namespace vpki {

using msg::DirectoryEntry;

/// Directory content as published by the operator, signed by the directory key.
struct DirectoryManifest {
  CaId signer;
  std::vector<DirectoryEntry> entries;
  Signature signature;
};

void encode(Writer& w, const DirectoryManifest& v);
void decode(Reader& r, DirectoryManifest& v);
Bytes signed_portion(const DirectoryManifest& v);

template <>
struct FileTag<DirectoryManifest> {
  static constexpr TypeTag value{'D', 'I', 'R', '1'};
};

DirectoryManifest make_manifest(std::vector<DirectoryEntry> entries, const CaId& signer, const crypto::PrivateKey& key);
/// Checks the signer (a directory authority in `trust`), the signature, and
/// that associations only name listed entries. Throws bad_signature /
/// unknown_issuer / decode_error.
void verify_manifest(const DirectoryManifest& manifest, const TrustStore& trust);

/// Static, read-only directory loaded from a verified manifest.
class DirectoryService final : public rpc::Server {
 public:
  DirectoryService(const DirectoryManifest& manifest, crypto::PrivateKey key, std::shared_ptr<const TrustStore> trust,
                   const Clock& clock);

  /// Throws not_found.
  const DirectoryEntry& lookup(const CaId& id) const;
  std::vector<DirectoryEntry> list_by_domain(const std::string& domain, std::optional<Role> role) const;

 protected:
  Bytes serve(const wire::Envelope& request) override;

 private:
  std::map<CaId, DirectoryEntry> entries_;
};

/// Vehicle/server side of directory queries.
class DirectoryClient {
 public:
  DirectoryClient(std::shared_ptr<transport::Endpoint> endpoint, CaId directory_id,
                  std::shared_ptr<const TrustStore> trust, const Clock& clock)
      : client_(std::move(endpoint), std::move(trust), clock), id_(std::move(directory_id)) {}

  DirectoryEntry lookup(const CaId& id) const;
  std::vector<DirectoryEntry> list(const std::string& domain, std::optional<Role> role = std::nullopt) const;

  /// Resolver that looks authorities up and connects over TCP to their address.
  rpc::Resolver tcp_resolver(int timeout_ms = 30000) const;

 private:
  rpc::Client client_;
  CaId id_;
};

}  // namespace vpki
