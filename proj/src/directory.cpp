#include "vpki/directory.hpp"

#include <set>

#include "vpki/errors.hpp"

namespace vpki {

namespace {

void encode_body(Writer& w, const DirectoryManifest& v) {
  w.str(v.signer);
  encode_seq(w, v.entries);
}

}  // namespace

void encode(Writer& w, const DirectoryManifest& v) {
  encode_body(w, v);
  encode(w, v.signature);
}

void decode(Reader& r, DirectoryManifest& v) {
  v.signer = r.str();
  decode_seq(r, v.entries, 8);
  decode(r, v.signature);
}

Bytes signed_portion(const DirectoryManifest& v) {
  Writer w;
  encode_body(w, v);
  return std::move(w).take();
}

DirectoryManifest make_manifest(std::vector<DirectoryEntry> entries, const CaId& signer, const crypto::PrivateKey& key) {
  DirectoryManifest m{signer, std::move(entries), {}};
  sign_in_place(m, key);
  return m;
}

void verify_manifest(const DirectoryManifest& manifest, const TrustStore& trust) {
  const auto* signer = trust.find(manifest.signer);
  if (signer == nullptr || signer->role != Role::directory)
    throw Error(ErrorCode::unknown_issuer, "manifest signer is not a directory: " + manifest.signer);
  if (!crypto::verify(signer->public_key, signed_portion(manifest), manifest.signature))
    throw Error(ErrorCode::bad_signature, "manifest signature");
  std::set<CaId> ids;
  for (const auto& e : manifest.entries)
    if (!ids.insert(e.ca_id).second) throw Error(ErrorCode::decode_error, "duplicate entry " + e.ca_id);
  for (const auto& e : manifest.entries)
    for (const auto& a : e.associations)
      if (!ids.contains(a)) throw Error(ErrorCode::decode_error, e.ca_id + " associates unknown " + a);
}

DirectoryService::DirectoryService(const DirectoryManifest& manifest, crypto::PrivateKey key,
                                   std::shared_ptr<const TrustStore> trust, const Clock& clock)
    : rpc::Server(manifest.signer, std::move(key), clock) {
  verify_manifest(manifest, *trust);
  for (const auto& e : manifest.entries) entries_.emplace(e.ca_id, e);
}

const DirectoryEntry& DirectoryService::lookup(const CaId& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::not_found, id);
  return it->second;
}

std::vector<DirectoryEntry> DirectoryService::list_by_domain(const std::string& domain, std::optional<Role> role) const {
  std::vector<DirectoryEntry> out;
  for (const auto& [id, e] : entries_)
    if (e.domain == domain && (!role || e.role == *role)) out.push_back(e);
  return out;
}

Bytes DirectoryService::serve(const wire::Envelope& request) {
  if (request.type() != wire::MsgType::dir_req)
    throw Error(ErrorCode::unsupported_message, std::string(wire::to_string(request.type())));
  auto req = canonical_decode<msg::DirectoryRequest>(request.payload);
  msg::DirectoryResponse res;
  if (req.kind == msg::DirectoryRequest::Kind::lookup)
    res.entries.push_back(lookup(req.ca_id));
  else
    res.entries = list_by_domain(req.domain, req.role);
  return canonical_encode(res);
}

DirectoryEntry DirectoryClient::lookup(const CaId& id) const {
  msg::DirectoryRequest req;
  req.kind = msg::DirectoryRequest::Kind::lookup;
  req.ca_id = id;
  auto res = canonical_decode<msg::DirectoryResponse>(client_.call(wire::MsgType::dir_req, canonical_encode(req), id_));
  if (res.entries.size() != 1 || res.entries[0].ca_id != id)
    throw Error(ErrorCode::mismatched_response, "directory answered for a different id");
  return res.entries[0];
}

std::vector<DirectoryEntry> DirectoryClient::list(const std::string& domain, std::optional<Role> role) const {
  msg::DirectoryRequest req;
  req.kind = msg::DirectoryRequest::Kind::list;
  req.domain = domain;
  req.role = role;
  return canonical_decode<msg::DirectoryResponse>(client_.call(wire::MsgType::dir_req, canonical_encode(req), id_))
      .entries;
}

rpc::Resolver DirectoryClient::tcp_resolver(int timeout_ms) const {
  return [this, timeout_ms](const CaId& id) -> std::shared_ptr<transport::Endpoint> {
    auto entry = lookup(id);
    if (entry.address.empty()) return nullptr;
    return std::make_shared<transport::TcpEndpoint>(transport::HostPort::parse(entry.address), timeout_ms);
  };
}

}  // namespace vpki
