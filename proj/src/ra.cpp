#include "vpki/ra.hpp"

#include <algorithm>

#include "vpki/errors.hpp"

namespace vpki {

namespace {

constexpr TypeTag kAuditTag{'A', 'U', 'D', '1'};

}  // namespace

void encode(Writer& w, const AuditLogEntry& v) {
  w.i64(v.at);
  msg::encode(w, v.request);
  w.count(v.steps.size());
  for (const auto& s : v.steps) {
    w.str(s.server);
    w.str(s.action);
    w.str(s.outcome);
  }
  w.str(v.outcome);
}

void decode(Reader& r, AuditLogEntry& v) {
  v.at = r.i64();
  msg::decode(r, v.request);
  v.steps.resize(r.count(12));
  for (auto& s : v.steps) {
    s.server = r.str();
    s.action = r.str();
    s.outcome = r.str();
  }
  v.outcome = r.str();
}

std::vector<AuditLogEntry> read_audit_log(const StateLog& log, TimePoint since) {
  std::vector<AuditLogEntry> out;
  log.replay([&](const TypeTag& tag, ByteView body) {
    if (tag != kAuditTag) return;
    auto e = canonical_decode<AuditLogEntry>(body);
    if (e.at >= since) out.push_back(std::move(e));
  });
  return out;
}

RaService::RaService(RaConfig config, crypto::PrivateKey key, std::shared_ptr<const TrustStore> trust,
                     const Clock& clock, rpc::Resolver resolver, std::shared_ptr<StateLog> state)
    : rpc::Server(config.id, std::move(key), clock),
      config_(std::move(config)),
      trust_(std::move(trust)),
      resolver_(std::move(resolver)),
      state_(std::move(state)) {
  if (state_) audit_ = read_audit_log(*state_, std::numeric_limits<TimePoint>::min());
}

rpc::Client RaService::client_for(const CaId& id) const {
  auto ep = resolver_(id);
  if (!ep) throw Error(ErrorCode::transport_error, "no route to " + id);
  return rpc::Client(std::move(ep), trust_, clock());
}

void RaService::append_audit(AuditLogEntry entry) {
  std::lock_guard lock(audit_mu_);
  if (state_) state_->append(kAuditTag, canonical_encode(entry));
  audit_.push_back(std::move(entry));
}

msg::ResolveResponse RaService::resolve(const msg::ResolveRequest& request) {
  if (request.justification.empty()) throw Error(ErrorCode::invalid_argument, "justification required");

  AuditLogEntry audit;
  audit.at = clock().now();
  audit.request = request;
  msg::ResolveResponse out;

  auto step = [&](const CaId& server, std::string action, auto&& fn) {
    try {
      auto r = fn();
      audit.steps.push_back({server, std::move(action), "ok"});
      return r;
    } catch (const Error& e) {
      audit.steps.push_back({server, std::move(action), std::string(to_string(e.code()))});
      throw;
    }
  };

  try {
    // pseudonym -> ticket, optionally revoking the ticket's pseudonyms
    auto map = step(request.pseudonym_issuer, request.revoke_pseudonyms ? "map+revoke" : "map", [&] {
      auto body = canonical_encode(msg::ResolveMapRequest{id(), request.pseudonym_serial, request.revoke_pseudonyms});
      return canonical_decode<msg::ResolveMapResponse>(client_for(request.pseudonym_issuer)
                                                           .call(wire::MsgType::resolve_map_req, body,
                                                                 request.pseudonym_issuer, &signing_key()));
    });
    out.ticket_issuer = map.ticket_issuer;
    out.ticket_serial = map.ticket_serial;
    out.revoked_pseudonyms = map.revoked_count;

    auto ask_ltca = [&](const CaId& ltca, SerialNumber serial) {
      return step(ltca, request.revoke_ltc ? "resolve_ticket+revoke_ltc" : "resolve_ticket", [&] {
        auto body = canonical_encode(msg::ResolveTicketRequest{id(), serial, request.revoke_ltc});
        return canonical_decode<msg::ResolveTicketResponse>(
            client_for(ltca).call(wire::MsgType::resolve_ticket_req, body, ltca, &signing_key()));
      });
    };

    auto first = ask_ltca(map.ticket_issuer, map.ticket_serial);
    if (!first.is_foreign) {
      out.complete = true;
      out.subject_id = first.subject_id;
      out.home_ltca = map.ticket_issuer;
      out.ltc_revoked = first.ltc_revoked;
    } else {
      out.home_ltca = first.home_ltca;
      out.foreign_ticket_serial = first.foreign_ticket_serial;
      try {
        auto home = ask_ltca(first.home_ltca, first.foreign_ticket_serial);
        if (home.is_foreign) throw Error(ErrorCode::unknown_ticket, "foreign pointer chain longer than one hop");
        out.complete = true;
        out.subject_id = home.subject_id;
        out.ltc_revoked = home.ltc_revoked;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::transport_error) throw;
      }
    }
  } catch (const Error& e) {
    audit.outcome = "FAILED:" + std::string(to_string(e.code()));
    append_audit(std::move(audit));
    throw;
  }
  audit.outcome = out.complete ? "COMPLETE" : "PARTIAL";
  append_audit(std::move(audit));
  return out;
}

std::vector<AuditLogEntry> RaService::audit_log(TimePoint since) const {
  std::lock_guard lock(audit_mu_);
  std::vector<AuditLogEntry> out;
  std::copy_if(audit_.begin(), audit_.end(), std::back_inserter(out),
               [&](const AuditLogEntry& e) { return e.at >= since; });
  return out;
}

Bytes RaService::serve(const wire::Envelope& request) {
  if (request.type() != wire::MsgType::resolve_req)
    throw Error(ErrorCode::unsupported_message, std::string(wire::to_string(request.type())));
  auto sreq = open_signed(request);
  bool authorized = std::any_of(config_.operator_keys.begin(), config_.operator_keys.end(),
                                [&](const PublicKey& k) { return rpc::verify_request(request, sreq, k); });
  if (!authorized) throw Error(ErrorCode::unauthorized, "resolution needs an operator signature");
  return canonical_encode(resolve(canonical_decode<msg::ResolveRequest>(sreq.body)));
}

}  // namespace vpki
