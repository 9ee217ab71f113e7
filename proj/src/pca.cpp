#include "vpki/pca.hpp"

#include <algorithm>

#include "vpki/errors.hpp"

namespace vpki {

namespace {

constexpr TypeTag kUsageTag{'U', 'S', 'E', '1'};
constexpr TypeTag kIndexTag{'I', 'D', 'X', '1'};
constexpr TypeTag kRevokedTag{'R', 'V', 'K', '1'};

}  // namespace

// --- RevocationState -------------------------------------------------------------

std::size_t RevocationState::revoke(const std::vector<SerialNumber>& serials) {
  std::lock_guard lock(mu_);
  std::vector<SerialNumber> added;
  for (auto s : serials)
    if (revoked_.insert(s).second) added.push_back(s);
  auto n = added.size();
  if (n > 0) {
    std::sort(added.begin(), added.end());
    added_.push_back(std::move(added));
  }
  return n;
}

bool RevocationState::is_revoked(SerialNumber serial) const {
  std::lock_guard lock(mu_);
  return revoked_.contains(serial);
}

std::uint64_t RevocationState::sequence() const {
  std::lock_guard lock(mu_);
  return added_.size();
}

std::vector<SerialNumber> RevocationState::entries() const {
  std::lock_guard lock(mu_);
  return {revoked_.begin(), revoked_.end()};
}

RevocationList RevocationState::publish(std::optional<std::uint64_t> since, const crypto::PrivateKey& key,
                                        TimePoint now) const {
  RevocationList crl;
  crl.issuer = issuer_;
  crl.issued_at = now;
  {
    std::lock_guard lock(mu_);
    crl.sequence = added_.size();
    if (since && *since <= crl.sequence) {
      crl.is_delta = true;
      crl.base_sequence = *since;
      for (auto k = *since; k < crl.sequence; ++k)
        crl.entries.insert(crl.entries.end(), added_[k].begin(), added_[k].end());
      std::sort(crl.entries.begin(), crl.entries.end());
    } else {
      crl.entries.assign(revoked_.begin(), revoked_.end());
    }
  }
  sign_in_place(crl, key);
  return crl;
}

// --- PcaService -----------------------------------------------------------------

PcaService::PcaService(PcaConfig config, crypto::PrivateKey key, std::shared_ptr<const TrustStore> trust,
                       const Clock& clock, std::shared_ptr<StateLog> state,
                       std::shared_ptr<RevocationState> revocation)
    : rpc::Server(config.id, std::move(key), clock, config.policy.clock_skew_seconds),
      config_(std::move(config)),
      trust_(std::move(trust)),
      state_(std::move(state)),
      revocation_(revocation ? std::move(revocation) : std::make_shared<RevocationState>(config_.id)) {
  config_.policy.validate();
  if (config_.replica_index > 0xff) throw Error(ErrorCode::invalid_argument, "replica index must fit in 8 bits");
  if (state_) replay();
}

msg::PseudonymResponse PcaService::issue_pseudonyms(const Rnd256& rnd, const Interval& requested,
                                                    const Ticket& ticket, const std::vector<Csr>& csrs) {
  const auto& p = config_.policy;
  if (csrs.empty()) throw Error(ErrorCode::empty_request, "no CSRs");
  if (csrs.size() > p.max_batch) throw Error(ErrorCode::batch_too_large, std::to_string(csrs.size()));
  auto now = clock().now();

  // (1) chain-valid, unexpired ticket
  auto v = validate_chain(ticket, *trust_, now);
  if (v != ValidationResult::valid) throw Error(ErrorCode::ticket_invalid, std::string(to_string(v)));
  // (2) the ticket commits to this PCA
  if (crypto::hash_bind(id(), rnd) != ticket.target_digest) throw Error(ErrorCode::ticket_binding_mismatch);
  // (3) requested sub-interval, after grid closure, inside the ticket
  if (!(requested.start < requested.end) || requested.start < p.grid_epoch)
    throw Error(ErrorCode::interval_violation, "malformed interval");
  auto closure = snap_outward(requested, p.pseudonym_lifetime_seconds, p.grid_epoch);
  if (!closure.within(ticket.interval)) throw Error(ErrorCode::interval_violation);

  // (4) single use; marked before PoP so an aborted request burns the ticket
  TicketKey key{ticket.issuer, ticket.serial};
  {
    std::lock_guard lock(usage_mu_);
    if (!usage_.emplace(key, TicketUsage{ticket.issuer, ticket.serial, now, requested, {}}).second)
      throw Error(ErrorCode::ticket_reused);
  }

  // (5) proof of possession with threshold abort
  std::vector<bool> pop_ok(csrs.size());
  std::size_t invalid = 0;
  for (std::size_t i = 0; i < csrs.size(); ++i) {
    pop_ok[i] = verify_pop(csrs[i]);
    if (!pop_ok[i]) ++invalid;
  }
  if (invalid >= p.pop_failure_threshold) {
    if (state_) {
      std::lock_guard lock(usage_mu_);
      state_->append(kUsageTag, canonical_encode(usage_.at(key)));
    }
    throw Error(ErrorCode::malicious_requester, std::to_string(invalid) + " invalid proofs of possession");
  }

  // (6) one pseudonym per valid CSR on consecutive grid slots
  auto slots = align_lifetimes(requested, p.pseudonym_lifetime_seconds, p.grid_epoch);
  msg::PseudonymResponse out;
  out.items.resize(csrs.size());
  std::vector<PseudonymIndexEntry> new_entries;
  std::size_t next_slot = 0;
  for (std::size_t i = 0; i < csrs.size(); ++i) {
    auto& item = out.items[i];
    if (!pop_ok[i]) {
      item.status = ErrorCode::bad_proof_of_possession;
      continue;
    }
    if (next_slot == slots.size()) {
      item.status = ErrorCode::no_slot;
      continue;
    }
    Pseudonym ps;
    ps.serial = (std::uint64_t{config_.replica_index} << transport::kReplicaShift) | next_counter_.fetch_add(1);
    ps.public_key = csrs[i].public_key;
    ps.interval = slots[next_slot++];
    ps.issuer = id();
    sign_in_place(ps, signing_key());
    new_entries.push_back(PseudonymIndexEntry{ps.serial, ticket.issuer, ticket.serial, ps.interval, ps.public_key});
    item.status = ErrorCode::ok;
    item.pseudonym = std::move(ps);
  }

  // (7) index
  {
    std::unique_lock lock(index_mu_);
    for (const auto& e : new_entries) {
      if (state_) state_->append(kIndexTag, canonical_encode(e));
      index_.emplace(e.serial, e);
    }
  }
  {
    std::lock_guard lock(usage_mu_);
    auto& u = usage_.at(key);
    for (const auto& e : new_entries) u.pseudonym_serials.push_back(e.serial);
    if (state_) state_->append(kUsageTag, canonical_encode(u));
  }
  return out;
}

std::size_t PcaService::revoke_for_ticket(const CaId& ticket_issuer, SerialNumber ticket_serial, TimePoint now) {
  std::vector<SerialNumber> serials;
  {
    std::lock_guard lock(usage_mu_);
    auto it = usage_.find({ticket_issuer, ticket_serial});
    if (it == usage_.end()) throw Error(ErrorCode::unknown_ticket, ticket_issuer + ":" + std::to_string(ticket_serial));
    serials = it->second.pseudonym_serials;
  }
  std::vector<SerialNumber> still_valid;
  {
    std::shared_lock lock(index_mu_);
    for (auto s : serials)
      if (index_.at(s).interval.end > now) still_valid.push_back(s);
  }
  if (state_ && !still_valid.empty()) {
    Writer w;
    w.count(still_valid.size());
    for (auto s : still_valid) w.u64(s);
    state_->append(kRevokedTag, w.data());
  }
  return revocation_->revoke(still_valid);
}

RevocationList PcaService::get_crl(std::optional<std::uint64_t> since_sequence) const {
  return revocation_->publish(since_sequence, signing_key(), clock().now());
}

msg::OcspStatus PcaService::ocsp_check(SerialNumber query_serial, const Pseudonym& requester, TimePoint now) const {
  auto v = validate_chain(requester, *trust_, now);
  if (v != ValidationResult::valid)
    throw Error(ErrorCode::unauthorized, "requester pseudonym " + std::string(to_string(v)));
  if (requester.issuer == id() && revocation_->is_revoked(requester.serial))
    throw Error(ErrorCode::unauthorized, "requester pseudonym revoked");
  if (revocation_->is_revoked(query_serial)) return msg::OcspStatus::revoked;
  std::shared_lock lock(index_mu_);
  return index_.contains(query_serial) ? msg::OcspStatus::good : msg::OcspStatus::unknown;
}

msg::ResolveMapResponse PcaService::map_pseudonym(SerialNumber serial, bool revoke) {
  msg::ResolveMapResponse out;
  {
    std::shared_lock lock(index_mu_);
    auto it = index_.find(serial);
    if (it == index_.end()) throw Error(ErrorCode::unknown_pseudonym, std::to_string(serial));
    out.ticket_issuer = it->second.ticket_issuer;
    out.ticket_serial = it->second.ticket_serial;
  }
  if (revoke) out.revoked_count = revoke_for_ticket(out.ticket_issuer, out.ticket_serial, clock().now());
  return out;
}

Bytes PcaService::serve(const wire::Envelope& request) {
  using wire::MsgType;
  switch (request.type()) {
    case MsgType::psnym_req: {
      auto body = canonical_decode<msg::PseudonymRequest>(request.payload);
      return canonical_encode(issue_pseudonyms(body.rnd, body.interval, body.ticket, body.csrs));
    }
    case MsgType::crl_req: {
      auto body = canonical_decode<msg::CrlRequest>(request.payload);
      return canonical_encode(msg::CrlResponse{get_crl(body.since_sequence)});
    }
    case MsgType::ocsp_req: {
      auto sreq = open_signed(request);
      auto body = canonical_decode<msg::OcspRequest>(sreq.body);
      if (!rpc::verify_request(request, sreq, body.requester.public_key))
        throw Error(ErrorCode::unauthorized, "request not signed by the requester pseudonym");
      auto now = clock().now();
      return canonical_encode(msg::OcspResponse{body.query_serial, ocsp_check(body.query_serial, body.requester, now), now});
    }
    case MsgType::resolve_map_req: {
      auto sreq = open_signed(request);
      auto body = canonical_decode<msg::ResolveMapRequest>(sreq.body);
      const auto* ra = trust_->find(body.ra_id);
      if (ra == nullptr || ra->role != Role::ra) throw Error(ErrorCode::unauthorized, "not an RA: " + body.ra_id);
      if (!rpc::verify_request(request, sreq, ra->public_key)) throw Error(ErrorCode::unauthorized, "bad RA signature");
      return canonical_encode(map_pseudonym(body.pseudonym_serial, body.revoke));
    }
    default:
      throw Error(ErrorCode::unsupported_message, std::string(wire::to_string(request.type())));
  }
}

PcaSnapshot PcaService::snapshot() const {
  PcaSnapshot s;
  s.ca_id = id();
  s.domain = config_.domain;
  s.replica = config_.replica_index;
  {
    std::lock_guard lock(usage_mu_);
    for (const auto& [key, u] : usage_) s.usage.push_back(u);
  }
  {
    std::shared_lock lock(index_mu_);
    for (const auto& [serial, e] : index_) s.index.push_back(e);
  }
  std::sort(s.index.begin(), s.index.end(), [](const auto& a, const auto& b) { return a.serial < b.serial; });
  s.revoked = revocation_->entries();
  return s;
}

std::size_t PcaService::issued_count() const {
  std::shared_lock lock(index_mu_);
  return index_.size();
}

void PcaService::replay() {
  std::uint64_t max_counter = 0;
  state_->replay([&](const TypeTag& tag, ByteView body) {
    if (tag == kUsageTag) {
      auto u = canonical_decode<TicketUsage>(body);
      usage_[{u.ticket_issuer, u.ticket_serial}] = u;
    } else if (tag == kIndexTag) {
      auto e = canonical_decode<PseudonymIndexEntry>(body);
      max_counter = std::max(max_counter, e.serial & ((std::uint64_t{1} << transport::kReplicaShift) - 1));
      index_[e.serial] = e;
    } else if (tag == kRevokedTag) {
      Reader r(body);
      std::vector<SerialNumber> serials(r.count(8));
      for (auto& s : serials) s = r.u64();
      revocation_->revoke(serials);
    }
  });
  next_counter_ = max_counter + 1;
}

}  // namespace vpki
