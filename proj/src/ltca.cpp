#include "vpki/ltca.hpp"

#include <algorithm>

#include "vpki/errors.hpp"

namespace vpki {

namespace {

constexpr TypeTag kRegisterTag{'V', 'E', 'H', '1'};
constexpr TypeTag kUpdateTag{'U', 'P', 'D', '1'};
constexpr TypeTag kRevokeTag{'R', 'E', 'V', '1'};
constexpr TypeTag kLedgerTag{'L', 'T', 'K', '1'};
constexpr TypeTag kExchangeTag{'X', 'C', 'H', '1'};

ErrorCode validation_error(ValidationResult r) {
  switch (r) {
    case ValidationResult::unknown_issuer: return ErrorCode::unknown_issuer;
    case ValidationResult::bad_signature: return ErrorCode::bad_signature;
    case ValidationResult::expired:
    case ValidationResult::not_yet_valid: return ErrorCode::expired;
    case ValidationResult::valid: return ErrorCode::ok;
  }
  return ErrorCode::internal;
}

}  // namespace

LtcaService::LtcaService(LtcaConfig config, crypto::PrivateKey key, std::shared_ptr<const TrustStore> trust,
                         const Clock& clock, std::shared_ptr<StateLog> state)
    : rpc::Server(config.id, std::move(key), clock, config.policy.clock_skew_seconds),
      config_(std::move(config)),
      trust_(std::move(trust)),
      state_(std::move(state)) {
  config_.policy.validate();
  if (state_) replay();
}

LtcaService::Stripe& LtcaService::stripe_for(const std::string& subject) {
  return stripes_[std::hash<std::string>{}(subject) % kStripes];
}

LongTermCertificate LtcaService::sign_ltc(const std::string& subject, const PublicKey& key, const Interval& validity) {
  LongTermCertificate ltc;
  ltc.serial = next_ltc_serial_.fetch_add(1);
  ltc.subject_id = subject;
  ltc.public_key = key;
  ltc.validity = validity;
  ltc.issuer = id();
  sign_in_place(ltc, signing_key());
  return ltc;
}

LongTermCertificate LtcaService::register_vehicle(const Csr& csr, const std::string& subject_id,
                                                  const Interval& validity) {
  if (subject_id.empty()) throw Error(ErrorCode::invalid_argument, "empty subject id");
  if (!(validity.start < validity.end)) throw Error(ErrorCode::invalid_argument, "empty validity");
  if (!verify_pop(csr)) throw Error(ErrorCode::bad_proof_of_possession);
  std::unique_lock lock(registry_mu_);
  if (registry_.contains(subject_id)) throw Error(ErrorCode::duplicate_subject, subject_id);
  auto ltc = sign_ltc(subject_id, csr.public_key, validity);
  if (state_) state_->append(kRegisterTag, canonical_encode(ltc));
  registry_.emplace(subject_id, VehicleRecord{subject_id, ltc, false, {}});
  return ltc;
}

void LtcaService::check_usable_ltc(const LongTermCertificate& ltc, TimePoint now) const {
  if (ltc.issuer != id()) throw Error(ErrorCode::unknown_issuer, "LTC issued by " + ltc.issuer);
  auto v = validate_chain(ltc, *trust_, now);
  if (v != ValidationResult::valid) throw Error(validation_error(v), std::string(to_string(v)));
  std::shared_lock lock(registry_mu_);
  auto it = registry_.find(ltc.subject_id);
  if (it == registry_.end()) throw Error(ErrorCode::unknown_subject, ltc.subject_id);
  if (it->second.revoked) throw Error(ErrorCode::revoked_credential, ltc.subject_id);
  if (it->second.current_ltc.serial != ltc.serial) throw Error(ErrorCode::revoked_credential, "superseded LTC");
}

LongTermCertificate LtcaService::update_ltc(const LongTermCertificate& old_ltc, const Csr& csr) {
  if (old_ltc.issuer != id()) throw Error(ErrorCode::unknown_issuer, "LTC issued by " + old_ltc.issuer);
  auto v = validate_chain(old_ltc, *trust_, clock().now());
  if (v != ValidationResult::valid) throw Error(validation_error(v), std::string(to_string(v)));
  if (!verify_pop(csr)) throw Error(ErrorCode::bad_proof_of_possession);
  std::unique_lock lock(registry_mu_);
  auto it = registry_.find(old_ltc.subject_id);
  if (it == registry_.end()) throw Error(ErrorCode::unknown_subject, old_ltc.subject_id);
  auto& rec = it->second;
  if (rec.revoked || rec.current_ltc.serial != old_ltc.serial) throw Error(ErrorCode::revoked_credential);
  auto ltc = sign_ltc(rec.subject_id, csr.public_key, old_ltc.validity);
  if (state_) state_->append(kUpdateTag, canonical_encode(ltc));
  rec.ltc_history.push_back(rec.current_ltc);
  rec.current_ltc = ltc;
  return ltc;
}

Ticket LtcaService::issue_ticket(const Digest256& digest, const Interval& requested, const LongTermCertificate& ltc) {
  if (!(requested.start < requested.end)) throw Error(ErrorCode::invalid_argument, "empty interval");
  auto now = clock().now();
  check_usable_ltc(ltc, now);

  const auto& p = config_.policy;
  auto snapped = snap_outward(requested, p.ticket_interval_seconds, p.grid_epoch);

  auto& stripe = stripe_for(ltc.subject_id);
  std::lock_guard lock(stripe.mu);
  auto& entries = stripe.entries[ltc.subject_id];
  for (const auto& e : entries) {
    if (e.interval.end <= now) continue;  // expired entries stay for resolution only
    if (e.interval.overlaps(snapped)) throw Error(ErrorCode::overlapping_ticket);
  }

  Ticket t;
  t.serial = next_ticket_serial_.fetch_add(1);
  t.target_digest = digest;
  t.interval = snapped;
  t.tkt_expiry = snapped.end;
  t.issuer = id();
  sign_in_place(t, signing_key());

  TicketLedgerEntry entry{t.serial, ltc.subject_id, snapped, digest, now};
  if (state_) state_->append(kLedgerTag, canonical_encode(entry));
  entries.push_back(entry);
  {
    std::unique_lock tl(tickets_mu_);
    native_by_serial_.emplace(t.serial, entry);
  }
  return t;
}

Ticket LtcaService::exchange_foreign_ticket(const Ticket& foreign_ticket, const Rnd256& rnd,
                                            const Digest256& digest_pca, const Interval& requested) {
  if (crypto::hash_bind(id(), rnd) != foreign_ticket.target_digest) throw Error(ErrorCode::ticket_binding_mismatch);
  auto now = clock().now();
  if (foreign_ticket.issuer == id()) throw Error(ErrorCode::unknown_issuer, "not a foreign ticket");
  auto v = validate_chain(foreign_ticket, *trust_, now);
  if (v == ValidationResult::unknown_issuer) throw Error(ErrorCode::unknown_issuer, foreign_ticket.issuer);
  if (v != ValidationResult::valid) throw Error(ErrorCode::ticket_invalid, std::string(to_string(v)));
  if (!(requested.start < requested.end) || !requested.within(foreign_ticket.interval))
    throw Error(ErrorCode::interval_violation);

  const auto& p = config_.policy;
  auto snapped = snap_outward(requested, p.ticket_interval_seconds, p.grid_epoch);
  snapped.start = std::max(snapped.start, foreign_ticket.interval.start);
  snapped.end = std::min(snapped.end, foreign_ticket.interval.end);

  std::unique_lock lock(tickets_mu_);
  auto key = std::make_pair(foreign_ticket.issuer, foreign_ticket.serial);
  if (exchanged_foreign_.contains(key)) throw Error(ErrorCode::ticket_reused);

  Ticket t;
  t.serial = next_ticket_serial_.fetch_add(1);
  t.target_digest = digest_pca;
  t.interval = snapped;
  t.tkt_expiry = snapped.end;
  t.issuer = id();
  sign_in_place(t, signing_key());

  ExchangeRecord rec{t.serial, foreign_ticket.issuer, foreign_ticket.serial, snapped, digest_pca, now};
  if (state_) state_->append(kExchangeTag, canonical_encode(rec));
  exchanged_foreign_.emplace(key, t.serial);
  exchanged_by_serial_.emplace(t.serial, rec);
  return t;
}

void LtcaService::apply_revocation(const std::string& subject_id) {
  auto it = registry_.find(subject_id);
  if (it == registry_.end()) throw Error(ErrorCode::unknown_subject, subject_id);
  it->second.revoked = true;
}

void LtcaService::revoke_ltc(const std::string& subject_id) {
  std::unique_lock lock(registry_mu_);
  auto it = registry_.find(subject_id);
  if (it == registry_.end()) throw Error(ErrorCode::unknown_subject, subject_id);
  if (it->second.revoked) return;
  if (state_) {
    Writer w;
    w.str(subject_id);
    state_->append(kRevokeTag, w.data());
  }
  it->second.revoked = true;
}

msg::ResolveTicketResponse LtcaService::resolve_ticket(SerialNumber ticket_serial, bool revoke_ltc_flag) {
  msg::ResolveTicketResponse out;
  {
    std::shared_lock lock(tickets_mu_);
    if (auto it = native_by_serial_.find(ticket_serial); it != native_by_serial_.end()) {
      out.subject_id = it->second.subject_id;
    } else if (auto ex = exchanged_by_serial_.find(ticket_serial); ex != exchanged_by_serial_.end()) {
      out.is_foreign = true;
      out.home_ltca = ex->second.foreign_issuer;
      out.foreign_ticket_serial = ex->second.foreign_serial;
      return out;
    } else {
      throw Error(ErrorCode::unknown_ticket, std::to_string(ticket_serial));
    }
  }
  if (revoke_ltc_flag) {
    revoke_ltc(out.subject_id);
    out.ltc_revoked = true;
  }
  return out;
}

void LtcaService::check_ra_request(const wire::Envelope& env, const msg::SignedRequest& req,
                                   const CaId& ra_id) const {
  const auto* ra = trust_->find(ra_id);
  if (ra == nullptr || ra->role != Role::ra) throw Error(ErrorCode::unauthorized, "not an RA: " + ra_id);
  if (!rpc::verify_request(env, req, ra->public_key)) throw Error(ErrorCode::unauthorized, "bad RA signature");
}

Bytes LtcaService::serve(const wire::Envelope& request) {
  using wire::MsgType;
  switch (request.type()) {
    case MsgType::ticket_req:
    case MsgType::ftkt_req: {
      auto sreq = open_signed(request);
      auto body = canonical_decode<msg::TicketRequest>(sreq.body);
      if (!rpc::verify_request(request, sreq, body.ltc.public_key))
        throw Error(ErrorCode::bad_signature, "request not signed by the LTC key");
      return canonical_encode(msg::TicketResponse{issue_ticket(body.target_digest, body.interval, body.ltc)});
    }
    case MsgType::ntkt_req: {
      auto body = canonical_decode<msg::ForeignExchangeRequest>(request.payload);
      return canonical_encode(msg::TicketResponse{
          exchange_foreign_ticket(body.foreign_ticket, body.rnd, body.target_digest, body.interval)});
    }
    case MsgType::reg_req: {
      auto sreq = open_signed(request);
      bool authorized = std::any_of(config_.operator_keys.begin(), config_.operator_keys.end(),
                                    [&](const PublicKey& k) { return rpc::verify_request(request, sreq, k); });
      if (!authorized) throw Error(ErrorCode::unauthorized, "registration needs an operator signature");
      auto body = canonical_decode<msg::RegisterRequest>(sreq.body);
      return canonical_encode(msg::LtcResponse{register_vehicle(body.csr, body.subject_id, body.validity)});
    }
    case MsgType::ltc_update_req: {
      auto sreq = open_signed(request);
      auto body = canonical_decode<msg::LtcUpdateRequest>(sreq.body);
      if (!rpc::verify_request(request, sreq, body.old_ltc.public_key))
        throw Error(ErrorCode::bad_signature, "request not signed by the old LTC key");
      return canonical_encode(msg::LtcResponse{update_ltc(body.old_ltc, body.csr)});
    }
    case MsgType::resolve_ticket_req: {
      auto sreq = open_signed(request);
      auto body = canonical_decode<msg::ResolveTicketRequest>(sreq.body);
      check_ra_request(request, sreq, body.ra_id);
      return canonical_encode(resolve_ticket(body.ticket_serial, body.revoke_ltc));
    }
    default:
      throw Error(ErrorCode::unsupported_message, std::string(wire::to_string(request.type())));
  }
}

LtcaSnapshot LtcaService::snapshot() const {
  LtcaSnapshot s;
  s.ca_id = id();
  s.domain = config_.domain;
  {
    std::shared_lock lock(registry_mu_);
    for (const auto& [subject, rec] : registry_) {
      VehicleSummary v{subject, {}, rec.revoked};
      for (const auto& old : rec.ltc_history) v.ltc_serials.push_back(old.serial);
      v.ltc_serials.push_back(rec.current_ltc.serial);
      s.vehicles.push_back(std::move(v));
    }
  }
  {
    std::shared_lock lock(tickets_mu_);
    for (const auto& [serial, e] : native_by_serial_) s.tickets.push_back(e);
    for (const auto& [serial, e] : exchanged_by_serial_) s.exchanges.push_back(e);
  }
  std::sort(s.vehicles.begin(), s.vehicles.end(),
            [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  std::sort(s.tickets.begin(), s.tickets.end(),
            [](const auto& a, const auto& b) { return a.ticket_serial < b.ticket_serial; });
  std::sort(s.exchanges.begin(), s.exchanges.end(),
            [](const auto& a, const auto& b) { return a.ticket_serial < b.ticket_serial; });
  return s;
}

std::size_t LtcaService::ticket_count() const {
  std::shared_lock lock(tickets_mu_);
  return native_by_serial_.size() + exchanged_by_serial_.size();
}

void LtcaService::replay() {
  SerialNumber max_ltc = 0;
  SerialNumber max_ticket = 0;
  state_->replay([&](const TypeTag& tag, ByteView body) {
    if (tag == kRegisterTag) {
      auto ltc = canonical_decode<LongTermCertificate>(body);
      max_ltc = std::max(max_ltc, ltc.serial);
      registry_[ltc.subject_id] = VehicleRecord{ltc.subject_id, ltc, false, {}};
    } else if (tag == kUpdateTag) {
      auto ltc = canonical_decode<LongTermCertificate>(body);
      max_ltc = std::max(max_ltc, ltc.serial);
      auto& rec = registry_.at(ltc.subject_id);
      rec.ltc_history.push_back(rec.current_ltc);
      rec.current_ltc = ltc;
    } else if (tag == kRevokeTag) {
      Reader r(body);
      apply_revocation(r.str());
    } else if (tag == kLedgerTag) {
      auto e = canonical_decode<TicketLedgerEntry>(body);
      max_ticket = std::max(max_ticket, e.ticket_serial);
      stripe_for(e.subject_id).entries[e.subject_id].push_back(e);
      native_by_serial_.emplace(e.ticket_serial, e);
    } else if (tag == kExchangeTag) {
      auto e = canonical_decode<ExchangeRecord>(body);
      max_ticket = std::max(max_ticket, e.ticket_serial);
      exchanged_foreign_.emplace(std::make_pair(e.foreign_issuer, e.foreign_serial), e.ticket_serial);
      exchanged_by_serial_.emplace(e.ticket_serial, e);
    }
  });
  next_ltc_serial_ = max_ltc + 1;
  next_ticket_serial_ = max_ticket + 1;
}

}  // namespace vpki
