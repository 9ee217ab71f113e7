#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <unordered_map>

#include "vpki/policy.hpp"
#include "vpki/rpc.hpp"
#include "vpki/snapshot.hpp"
#include "vpki/state_log.hpp"

namespace vpki {

/// Revoked serials and CRL sequence for one PCA identity. Replicas of the
/// same PCA may share one instance so they publish a single CRL.
class RevocationState {
 public:
  explicit RevocationState(CaId issuer) : issuer_(std::move(issuer)) {}

  /// Adds serials; bumps the sequence once if anything was new. Returns the
  /// number of newly revoked serials.
  std::size_t revoke(const std::vector<SerialNumber>& serials);
  bool is_revoked(SerialNumber serial) const;
  std::uint64_t sequence() const;
  std::vector<SerialNumber> entries() const;

  /// Full list, or a delta with entries added after `since` when that
  /// sequence is known. Unknown sequences get the full list.
  RevocationList publish(std::optional<std::uint64_t> since, const crypto::PrivateKey& key, TimePoint now) const;

 private:
  CaId issuer_;
  mutable std::mutex mu_;
  std::set<SerialNumber> revoked_;
  std::vector<std::vector<SerialNumber>> added_;  // added_[k] = entries that produced sequence k+1
};

struct PcaConfig {
  CaId id;
  std::string domain;
  DomainPolicy policy;
  std::uint32_t replica_index = 0;
};

class PcaService final : public rpc::Server {
 public:
  PcaService(PcaConfig config, crypto::PrivateKey key, std::shared_ptr<const TrustStore> trust, const Clock& clock,
             std::shared_ptr<StateLog> state = nullptr, std::shared_ptr<RevocationState> revocation = nullptr);

  /// Whole-request failures throw; per-CSR outcomes are in the items.
  msg::PseudonymResponse issue_pseudonyms(const Rnd256& rnd, const Interval& requested, const Ticket& ticket,
                                          const std::vector<Csr>& csrs);

  /// Returns the number of pseudonyms newly placed on the CRL.
  std::size_t revoke_for_ticket(const CaId& ticket_issuer, SerialNumber ticket_serial, TimePoint now);
  RevocationList get_crl(std::optional<std::uint64_t> since_sequence) const;
  msg::OcspStatus ocsp_check(SerialNumber query_serial, const Pseudonym& requester, TimePoint now) const;
  msg::ResolveMapResponse map_pseudonym(SerialNumber serial, bool revoke);

  PcaSnapshot snapshot() const;
  const PcaConfig& config() const { return config_; }
  const std::shared_ptr<RevocationState>& revocation() const { return revocation_; }
  std::size_t issued_count() const;

 protected:
  Bytes serve(const wire::Envelope& request) override;

 private:
  using TicketKey = std::pair<CaId, SerialNumber>;
  void replay();

  PcaConfig config_;
  std::shared_ptr<const TrustStore> trust_;
  std::shared_ptr<StateLog> state_;
  std::shared_ptr<RevocationState> revocation_;

  mutable std::mutex usage_mu_;
  std::map<TicketKey, TicketUsage> usage_;

  mutable std::shared_mutex index_mu_;
  std::unordered_map<SerialNumber, PseudonymIndexEntry> index_;
  std::atomic<std::uint64_t> next_counter_{1};
};

}  // namespace vpki
