#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>

#include "vpki/policy.hpp"
#include "vpki/rpc.hpp"

namespace vpki {

struct PooledPseudonym {
  KeyPair keys;
  Pseudonym pseudonym;
};

/// A ticket and the random value that opens its digest. `target` is known
/// only to the vehicle.
struct HeldTicket {
  Ticket ticket;
  Rnd256 rnd;
  CaId target;
};

/// Key material generated ahead of a pseudonym request.
struct PreparedKey {
  KeyPair keys;
  Csr csr;
};
std::vector<PreparedKey> prepare_keys(std::size_t n);

struct VehicleConfig {
  std::string subject_id;
  CaId home_ltca;
  /// Grid of the domain an authority belongs to; used to snap requests
  /// before they leave the vehicle.
  std::function<DomainPolicy(const CaId&)> policy_for;
};

/// On-board client. One instance is driven by one thread at a time.
class VehicleClient {
 public:
  VehicleClient(VehicleConfig config, KeyPair ltc_keys, LongTermCertificate ltc,
                std::shared_ptr<const TrustStore> trust, const Clock& clock, rpc::Resolver resolver);

  /// Requests a ticket for `target` from the home LTCA. Only the grid-snapped
  /// interval and the digest are sent.
  const HeldTicket& acquire_ticket(const CaId& target, const Interval& interval);

  /// Uses the held ticket. Returns the number of pseudonyms pooled.
  std::size_t acquire_pseudonyms(const CaId& pca, const Interval& sub_interval, std::vector<PreparedKey> keys);
  std::size_t acquire_pseudonyms(const CaId& pca, const Interval& sub_interval, std::size_t n);

  /// Foreign-domain acquisition: f-ticket from the home LTCA, exchange at the
  /// foreign LTCA, pseudonyms from the foreign PCA.
  std::size_t roam(const CaId& foreign_ltca, const CaId& foreign_pca, const Interval& interval, std::size_t n);
  /// Roaming stage 1: ticket whose digest hides the foreign LTCA.
  const HeldTicket& request_foreign_ticket(const CaId& foreign_ltca, const Interval& interval);
  /// Roaming stage 2: trades the held foreign ticket for one bound to `foreign_pca`.
  /// A binding mismatch burns the held foreign ticket.
  const HeldTicket& exchange_foreign_ticket(const CaId& foreign_pca, const Interval& interval,
                                            std::optional<Rnd256> override_rnd = std::nullopt);

  const PooledPseudonym* current_pseudonym(TimePoint now) const;
  /// Drops pool entries that ended at or before `now`.
  void prune(TimePoint now);

  /// Returns the cache size after the refresh. One retry on transport errors.
  std::size_t refresh_crl(const CaId& pca);
  msg::OcspStatus check_status(const CaId& pca, SerialNumber serial, TimePoint now);
  msg::OcspStatus check_status_as(const PooledPseudonym& authenticator, const CaId& pca, SerialNumber serial);

  void update_ltc();

  const std::vector<PooledPseudonym>& pool() const { return pool_; }
  const std::optional<HeldTicket>& held_ticket() const { return ticket_; }
  const LongTermCertificate& ltc() const { return ltc_; }
  const std::string& subject_id() const { return config_.subject_id; }
  const std::set<SerialNumber>* crl_cache(const CaId& pca) const;
  std::optional<std::uint64_t> crl_sequence(const CaId& pca) const;

 private:
  rpc::Client client_for(const CaId& id) const;
  Ticket request_ticket(const CaId& target, const Interval& interval, const Rnd256& rnd);

  VehicleConfig config_;
  KeyPair ltc_keys_;
  LongTermCertificate ltc_;
  std::shared_ptr<const TrustStore> trust_;
  const Clock& clock_;
  rpc::Resolver resolver_;

  std::optional<HeldTicket> ticket_;
  std::optional<HeldTicket> foreign_ticket_;
  std::vector<PooledPseudonym> pool_;  // sorted by interval start, pairwise disjoint
  struct CrlCache {
    std::uint64_t sequence = 0;
    std::set<SerialNumber> serials;
  };
  std::map<CaId, CrlCache> crls_;
};

/// Operator-side registration over the wire.
LongTermCertificate register_remote(const rpc::Client& ltca, const CaId& ltca_id, const crypto::PrivateKey& operator_key,
                                    const std::string& subject_id, const KeyPair& keys, const Interval& validity);

}  // namespace vpki
