#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "vpki/policy.hpp"
#include "vpki/rpc.hpp"
#include "vpki/snapshot.hpp"
#include "vpki/state_log.hpp"

namespace vpki {

struct VehicleRecord {
  std::string subject_id;
  LongTermCertificate current_ltc;
  bool revoked = false;
  std::vector<LongTermCertificate> ltc_history;
};

struct LtcaConfig {
  CaId id;
  std::string domain;
  DomainPolicy policy;
  /// Keys allowed to sign registration requests.
  std::vector<PublicKey> operator_keys;
};

/// Home-domain identity provider. Issues LTCs and tickets; the ticket ledger
/// enforces at most one unexpired ticket per subject per instant.
class LtcaService final : public rpc::Server {
 public:
  LtcaService(LtcaConfig config, crypto::PrivateKey key, std::shared_ptr<const TrustStore> trust,
              const Clock& clock, std::shared_ptr<StateLog> state = nullptr);

  LongTermCertificate register_vehicle(const Csr& csr, const std::string& subject_id, const Interval& validity);
  LongTermCertificate update_ltc(const LongTermCertificate& old_ltc, const Csr& csr);

  /// Caller has already proven possession of the LTC key. Serves both native
  /// and foreign-ticket requests; the digest is opaque here.
  Ticket issue_ticket(const Digest256& digest, const Interval& requested, const LongTermCertificate& ltc);

  Ticket exchange_foreign_ticket(const Ticket& foreign_ticket, const Rnd256& rnd, const Digest256& digest_pca,
                                 const Interval& requested);

  msg::ResolveTicketResponse resolve_ticket(SerialNumber ticket_serial, bool revoke_ltc);
  /// Idempotent.
  void revoke_ltc(const std::string& subject_id);

  LtcaSnapshot snapshot() const;
  const LtcaConfig& config() const { return config_; }
  std::size_t ticket_count() const;

 protected:
  Bytes serve(const wire::Envelope& request) override;

 private:
  struct Stripe {
    std::mutex mu;
    std::unordered_map<std::string, std::vector<TicketLedgerEntry>> entries;
  };
  static constexpr std::size_t kStripes = 64;
  Stripe& stripe_for(const std::string& subject);

  void check_usable_ltc(const LongTermCertificate& ltc, TimePoint now) const;
  void check_ra_request(const wire::Envelope& env, const msg::SignedRequest& req, const CaId& ra_id) const;
  LongTermCertificate sign_ltc(const std::string& subject, const PublicKey& key, const Interval& validity);
  void apply_revocation(const std::string& subject_id);
  void replay();

  LtcaConfig config_;
  std::shared_ptr<const TrustStore> trust_;
  std::shared_ptr<StateLog> state_;

  mutable std::shared_mutex registry_mu_;
  std::unordered_map<std::string, VehicleRecord> registry_;
  std::atomic<SerialNumber> next_ltc_serial_{1};

  std::array<Stripe, kStripes> stripes_;
  std::atomic<SerialNumber> next_ticket_serial_{1};

  mutable std::shared_mutex tickets_mu_;
  std::unordered_map<SerialNumber, TicketLedgerEntry> native_by_serial_;
  std::unordered_map<SerialNumber, ExchangeRecord> exchanged_by_serial_;
  std::map<std::pair<CaId, SerialNumber>, SerialNumber> exchanged_foreign_;
};

}  // namespace vpki
