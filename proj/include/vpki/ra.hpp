#pragma once

#include <mutex>
#include <vector>

#include "vpki/rpc.hpp"
#include "vpki/state_log.hpp"

namespace vpki {

struct AuditStep {
  CaId server;
  std::string action;
  std::string outcome;

  bool operator==(const AuditStep&) const = default;
};

struct AuditLogEntry {
  TimePoint at = 0;
  msg::ResolveRequest request;
  std::vector<AuditStep> steps;
  std::string outcome;  // COMPLETE, PARTIAL or FAILED:<code>
};

struct RaConfig {
  CaId id;
  /// Keys allowed to order a resolution.
  std::vector<PublicKey> operator_keys;
};

/// Resolution authority. Holds no pseudonym/identity table of its own: each
/// resolution walks PCA -> ticket-issuing LTCA -> (home LTCA) and is logged.
class RaService final : public rpc::Server {
 public:
  RaService(RaConfig config, crypto::PrivateKey key, std::shared_ptr<const TrustStore> trust, const Clock& clock,
            rpc::Resolver resolver, std::shared_ptr<StateLog> state = nullptr);

  /// If the home LTCA cannot be reached on the extra hop, returns a partial
  /// result (complete = false) carrying the foreign pointer.
  msg::ResolveResponse resolve(const msg::ResolveRequest& request);
  std::vector<AuditLogEntry> audit_log(TimePoint since) const;

 protected:
  Bytes serve(const wire::Envelope& request) override;

 private:
  rpc::Client client_for(const CaId& id) const;
  void append_audit(AuditLogEntry entry);

  RaConfig config_;
  std::shared_ptr<const TrustStore> trust_;
  rpc::Resolver resolver_;
  std::shared_ptr<StateLog> state_;
  mutable std::mutex audit_mu_;
  std::vector<AuditLogEntry> audit_;
};

void encode(Writer& w, const AuditLogEntry& v);
void decode(Reader& r, AuditLogEntry& v);
/// Reads the audit entries persisted in an RA state file.
std::vector<AuditLogEntry> read_audit_log(const StateLog& log, TimePoint since);

}  // namespace vpki
