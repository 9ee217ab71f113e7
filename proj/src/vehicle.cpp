#include "vpki/vehicle.hpp"

#include <algorithm>

#include "vpki/errors.hpp"

namespace vpki {

std::vector<PreparedKey> prepare_keys(std::size_t n) {
  std::vector<PreparedKey> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto kp = crypto::generate_keypair();
    auto csr = make_csr(kp);
    out.push_back(PreparedKey{std::move(kp), std::move(csr)});
  }
  return out;
}

VehicleClient::VehicleClient(VehicleConfig config, KeyPair ltc_keys, LongTermCertificate ltc,
                             std::shared_ptr<const TrustStore> trust, const Clock& clock, rpc::Resolver resolver)
    : config_(std::move(config)),
      ltc_keys_(std::move(ltc_keys)),
      ltc_(std::move(ltc)),
      trust_(std::move(trust)),
      clock_(clock),
      resolver_(std::move(resolver)) {}

rpc::Client VehicleClient::client_for(const CaId& id) const {
  auto ep = resolver_(id);
  if (!ep) throw Error(ErrorCode::transport_error, "no route to " + id);
  return rpc::Client(std::move(ep), trust_, clock_);
}

Ticket VehicleClient::request_ticket(const CaId& target, const Interval& interval, const Rnd256& rnd) {
  auto policy = config_.policy_for(config_.home_ltca);
  auto snapped = snap_outward(interval, policy.ticket_interval_seconds, policy.grid_epoch);
  msg::TicketRequest req{crypto::hash_bind(target, rnd), snapped, ltc_};
  auto body = client_for(config_.home_ltca)
                  .call(wire::MsgType::ticket_req, canonical_encode(req), config_.home_ltca, &ltc_keys_.private_key);
  auto ticket = canonical_decode<msg::TicketResponse>(body).ticket;
  if (ticket.issuer != config_.home_ltca || ticket.target_digest != req.target_digest ||
      validate_chain(ticket, *trust_, clock_.now()) != ValidationResult::valid || !interval.within(ticket.interval))
    throw Error(ErrorCode::response_invalid, "ticket does not match the request");
  return ticket;
}

const HeldTicket& VehicleClient::acquire_ticket(const CaId& target, const Interval& interval) {
  auto rnd = Rnd256::random();
  auto ticket = request_ticket(target, interval, rnd);
  ticket_ = HeldTicket{std::move(ticket), rnd, target};
  return *ticket_;
}

std::size_t VehicleClient::acquire_pseudonyms(const CaId& pca, const Interval& sub_interval, std::size_t n) {
  return acquire_pseudonyms(pca, sub_interval, prepare_keys(n));
}

std::size_t VehicleClient::acquire_pseudonyms(const CaId& pca, const Interval& sub_interval,
                                              std::vector<PreparedKey> keys) {
  if (!ticket_) throw Error(ErrorCode::invalid_argument, "no ticket held");
  if (ticket_->target != pca) throw Error(ErrorCode::invalid_argument, "held ticket is bound to " + ticket_->target);
  if (!sub_interval.within(ticket_->ticket.interval))
    throw Error(ErrorCode::interval_violation, "sub-interval outside the ticket");

  msg::PseudonymRequest req;
  req.rnd = ticket_->rnd;
  req.interval = sub_interval;
  req.ticket = ticket_->ticket;
  req.csrs.reserve(keys.size());
  for (const auto& k : keys) req.csrs.push_back(k.csr);

  msg::PseudonymResponse res;
  try {
    res = canonical_decode<msg::PseudonymResponse>(
        client_for(pca).call(wire::MsgType::psnym_req, canonical_encode(req), pca));
  } catch (const Error& e) {
    // The ticket stays usable only if the request may never have been processed.
    if (e.code() != ErrorCode::transport_error) ticket_.reset();
    throw;
  }
  ticket_.reset();

  if (res.items.size() != keys.size()) throw Error(ErrorCode::mismatched_response, "item count differs from CSR count");
  auto policy = config_.policy_for(pca);
  auto closure = snap_outward(sub_interval, policy.pseudonym_lifetime_seconds, policy.grid_epoch);
  std::vector<PooledPseudonym> fresh;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& item = res.items[i];
    if (item.status != ErrorCode::ok) continue;
    if (!item.pseudonym) throw Error(ErrorCode::mismatched_response, "ok item without pseudonym");
    const auto& ps = *item.pseudonym;
    if (ps.public_key != keys[i].keys.public_key)
      throw Error(ErrorCode::mismatched_response, "pseudonym key differs from its CSR");
    if (ps.issuer != pca || validate_chain(ps, *trust_, ps.interval.start) != ValidationResult::valid ||
        !ps.interval.within(closure))
      throw Error(ErrorCode::response_invalid, "pseudonym fails validation");
    fresh.push_back(PooledPseudonym{std::move(keys[i].keys), ps});
  }
  for (const auto& f : fresh)
    for (const auto& p : pool_)
      if (p.pseudonym.interval.overlaps(f.pseudonym.interval))
        throw Error(ErrorCode::response_invalid, "pseudonym overlaps the pool");
  for (std::size_t i = 0; i < fresh.size(); ++i)
    for (std::size_t j = i + 1; j < fresh.size(); ++j)
      if (fresh[i].pseudonym.interval.overlaps(fresh[j].pseudonym.interval))
        throw Error(ErrorCode::response_invalid, "overlapping pseudonyms in one response");

  auto n = fresh.size();
  pool_.insert(pool_.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));
  std::sort(pool_.begin(), pool_.end(),
            [](const auto& a, const auto& b) { return a.pseudonym.interval.start < b.pseudonym.interval.start; });
  return n;
}

const HeldTicket& VehicleClient::request_foreign_ticket(const CaId& foreign_ltca, const Interval& interval) {
  auto rnd = Rnd256::random();
  auto ticket = request_ticket(foreign_ltca, interval, rnd);
  foreign_ticket_ = HeldTicket{std::move(ticket), rnd, foreign_ltca};
  return *foreign_ticket_;
}

const HeldTicket& VehicleClient::exchange_foreign_ticket(const CaId& foreign_pca, const Interval& interval,
                                                         std::optional<Rnd256> override_rnd) {
  if (!foreign_ticket_) throw Error(ErrorCode::invalid_argument, "no foreign ticket held");
  const auto& f = *foreign_ticket_;
  auto policy = config_.policy_for(f.target);
  auto snapped = snap_outward(interval, policy.ticket_interval_seconds, policy.grid_epoch);
  snapped.start = std::max(snapped.start, f.ticket.interval.start);
  snapped.end = std::min(snapped.end, f.ticket.interval.end);
  if (!(snapped.start < snapped.end)) throw Error(ErrorCode::interval_violation, "interval outside the foreign ticket");

  auto rnd = Rnd256::random();
  msg::ForeignExchangeRequest req{f.ticket, override_rnd.value_or(f.rnd), crypto::hash_bind(foreign_pca, rnd), snapped};
  Ticket ticket;
  try {
    ticket = canonical_decode<msg::TicketResponse>(
                 client_for(f.target).call(wire::MsgType::ntkt_req, canonical_encode(req), f.target))
                 .ticket;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ticket_binding_mismatch || e.code() == ErrorCode::ticket_reused ||
        e.code() == ErrorCode::ticket_invalid)
      foreign_ticket_.reset();
    throw;
  }
  if (ticket.issuer != f.target || ticket.target_digest != req.target_digest ||
      validate_chain(ticket, *trust_, clock_.now()) != ValidationResult::valid)
    throw Error(ErrorCode::response_invalid, "exchanged ticket does not match the request");
  foreign_ticket_.reset();
  ticket_ = HeldTicket{std::move(ticket), rnd, foreign_pca};
  return *ticket_;
}

std::size_t VehicleClient::roam(const CaId& foreign_ltca, const CaId& foreign_pca, const Interval& interval,
                                std::size_t n) {
  auto keys = prepare_keys(n);
  request_foreign_ticket(foreign_ltca, interval);
  exchange_foreign_ticket(foreign_pca, interval);
  return acquire_pseudonyms(foreign_pca, interval, std::move(keys));
}

const PooledPseudonym* VehicleClient::current_pseudonym(TimePoint now) const {
  auto it = std::upper_bound(pool_.begin(), pool_.end(), now,
                             [](TimePoint t, const PooledPseudonym& p) { return t < p.pseudonym.interval.start; });
  if (it == pool_.begin()) return nullptr;
  --it;
  return it->pseudonym.interval.contains(now) ? &*it : nullptr;
}

void VehicleClient::prune(TimePoint now) {
  std::erase_if(pool_, [&](const PooledPseudonym& p) { return p.pseudonym.interval.end <= now; });
}

std::size_t VehicleClient::refresh_crl(const CaId& pca) {
  auto& cache = crls_[pca];
  bool have = cache.sequence > 0 || !cache.serials.empty();
  msg::CrlRequest req;
  if (have) req.since_sequence = cache.sequence;

  RevocationList crl;
  for (int attempt = 0;; ++attempt) {
    try {
      crl = canonical_decode<msg::CrlResponse>(client_for(pca).call(wire::MsgType::crl_req, canonical_encode(req), pca))
                .crl;
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::transport_error || attempt == 1) throw;
    }
  }
  const auto* issuer = trust_->find(pca);
  if (crl.issuer != pca || issuer == nullptr || !crypto::verify(issuer->public_key, signed_portion(crl), crl.signature))
    throw Error(ErrorCode::response_invalid, "CRL signature");
  if (crl.sequence < cache.sequence) throw Error(ErrorCode::response_invalid, "CRL sequence went backwards");
  if (crl.is_delta) {
    if (crl.base_sequence != cache.sequence) throw Error(ErrorCode::response_invalid, "delta against unknown base");
    cache.serials.insert(crl.entries.begin(), crl.entries.end());
  } else {
    cache.serials = std::set<SerialNumber>(crl.entries.begin(), crl.entries.end());
  }
  cache.sequence = crl.sequence;
  return cache.serials.size();
}

const std::set<SerialNumber>* VehicleClient::crl_cache(const CaId& pca) const {
  auto it = crls_.find(pca);
  return it == crls_.end() ? nullptr : &it->second.serials;
}

std::optional<std::uint64_t> VehicleClient::crl_sequence(const CaId& pca) const {
  auto it = crls_.find(pca);
  if (it == crls_.end()) return std::nullopt;
  return it->second.sequence;
}

msg::OcspStatus VehicleClient::check_status(const CaId& pca, SerialNumber serial, TimePoint now) {
  const auto* current = current_pseudonym(now);
  if (current == nullptr) throw Error(ErrorCode::unauthorized, "no current pseudonym");
  return check_status_as(*current, pca, serial);
}

msg::OcspStatus VehicleClient::check_status_as(const PooledPseudonym& authenticator, const CaId& pca,
                                               SerialNumber serial) {
  msg::OcspRequest req{serial, authenticator.pseudonym};
  auto res = canonical_decode<msg::OcspResponse>(client_for(pca).call(
      wire::MsgType::ocsp_req, canonical_encode(req), pca, &authenticator.keys.private_key));
  if (res.query_serial != serial) throw Error(ErrorCode::mismatched_response, "OCSP answer for another serial");
  return res.status;
}

void VehicleClient::update_ltc() {
  auto kp = crypto::generate_keypair();
  msg::LtcUpdateRequest req{ltc_, make_csr(kp)};
  auto ltc = canonical_decode<msg::LtcResponse>(client_for(config_.home_ltca)
                                                    .call(wire::MsgType::ltc_update_req, canonical_encode(req),
                                                          config_.home_ltca, &ltc_keys_.private_key))
                 .ltc;
  if (ltc.public_key != kp.public_key || ltc.subject_id != ltc_.subject_id ||
      validate_chain(ltc, *trust_, clock_.now()) != ValidationResult::valid)
    throw Error(ErrorCode::response_invalid, "updated LTC does not match");
  ltc_ = std::move(ltc);
  ltc_keys_ = std::move(kp);
}

LongTermCertificate register_remote(const rpc::Client& ltca, const CaId& ltca_id, const crypto::PrivateKey& operator_key,
                                    const std::string& subject_id, const KeyPair& keys, const Interval& validity) {
  msg::RegisterRequest req{make_csr(keys), subject_id, validity};
  auto ltc = canonical_decode<msg::LtcResponse>(
                 ltca.call(wire::MsgType::reg_req, canonical_encode(req), ltca_id, &operator_key))
                 .ltc;
  if (ltc.public_key != keys.public_key || ltc.subject_id != subject_id)
    throw Error(ErrorCode::response_invalid, "LTC does not match the registration");
  return ltc;
}

}  // namespace vpki
