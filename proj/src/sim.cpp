#include "vpki/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "vpki/errors.hpp"

namespace vpki::sim {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(AttackKind k) { return k == AttackKind::fake_ltc ? "fake_ltc" : "fake_ticket"; }

namespace {

AttackKind attack_kind_from(const std::string& s) {
  if (s == "fake_ltc") return AttackKind::fake_ltc;
  if (s == "fake_ticket") return AttackKind::fake_ticket;
  throw Error(ErrorCode::scenario_invalid, "unknown attacker kind " + s);
}

}  // namespace

// --- scenario ------------------------------------------------------------------

void Scenario::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::scenario_invalid, what); };
  if (!(duration_seconds > 0)) bad("duration must be positive");
  if (requests_per_hour < 0 || attacker_rate < 0) bad("rates must be non-negative");
  if (pseudonyms_per_request == 0) bad("pseudonyms_per_request must be positive");
  if (roaming_fraction < 0 || roaming_fraction > 1) bad("roaming_fraction must be in [0, 1]");
  if (resolution_sample < 0 || resolution_sample > 1) bad("resolution_sample must be in [0, 1]");
  if (mode != "virtual" && mode != "realtime") bad("mode must be virtual or realtime");
  if (!(time_scale > 0)) bad("time_scale must be positive");
  if (clients == 0) bad("clients must be positive");
  if (attackers > 0 && attacker_kinds.empty()) bad("attackers need at least one kind");
  if (roaming_fraction > 0 && topology.domains.size() < 2) bad("roaming needs two domains");
  if (revocations > 0 && mode != "virtual") bad("revocations are only scheduled in virtual mode");
  for (const auto& f : faults)
    if (f.at < 0 || (f.restart_at && *f.restart_at < f.at)) bad("fault times out of order");
  if (ddos && (ddos->steps.empty() || ddos->legit_clients == 0 || !(ddos->step_seconds > 0)))
    bad("ddos needs steps, clients and a positive step length");
  try {
    for (const auto& d : topology.domains) {
      if (d.pcas == 0 || d.replicas == 0) bad("domain " + d.name + " needs a PCA");
      d.policy.validate();
      if (static_cast<TimePoint>(pseudonyms_per_request) * d.policy.pseudonym_lifetime_seconds >
          d.policy.ticket_interval_seconds * 64)
        bad("pseudonyms_per_request * tau is far beyond the ticket interval of " + d.name);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::scenario_invalid) throw;
    bad(e.what());
  }
  if (topology.domains.empty()) bad("topology has no domains");
}

Scenario Scenario::from_json_text(const std::string& text) {
  Scenario s;
  try {
    auto j = json::parse(text);
    s.vehicles = j.value("vehicles", s.vehicles);
    s.requests_per_hour = j.value("requests_per_hour", s.requests_per_hour);
    s.pseudonyms_per_request = j.value("pseudonyms_per_request", s.pseudonyms_per_request);
    s.duration_seconds = j.value("duration_seconds", s.duration_seconds);
    s.roaming_fraction = j.value("roaming_fraction", s.roaming_fraction);
    s.attackers = j.value("attackers", s.attackers);
    s.attacker_rate = j.value("attacker_rate", s.attacker_rate);
    if (j.contains("attacker_kinds")) {
      s.attacker_kinds.clear();
      for (const auto& k : j["attacker_kinds"]) s.attacker_kinds.push_back(attack_kind_from(k.get<std::string>()));
    }
    s.seed = j.value("seed", s.seed);
    s.mode = j.value("mode", s.mode);
    s.time_scale = j.value("time_scale", s.time_scale);
    s.clients = j.value("clients", s.clients);
    s.server_workers = j.value("server_workers", s.server_workers);
    s.balancer_probe_seconds = j.value("balancer_probe_seconds", s.balancer_probe_seconds);
    s.resolution_sample = j.value("resolution_sample", s.resolution_sample);
    s.revocations = j.value("revocations", s.revocations);
    s.origin = j.value("origin", s.origin);

    DomainPolicy base;
    if (j.contains("policy")) base = DomainPolicy::from_json_text(j["policy"].dump());
    if (j.contains("topology")) {
      s.topology = Topology::from_json_text(j["topology"].dump());
      const auto& doms = j["topology"].at("domains");
      for (std::size_t i = 0; i < doms.size(); ++i)
        if (!doms[i].contains("policy")) s.topology.domains[i].policy = base;
    } else {
      s.topology.domains.push_back(DomainSpec{"A", 1, 1, base});
    }

    for (const auto& f : j.value("faults", json::array())) {
      FaultSpec spec{f.at("server").get<std::string>(), f.at("at").get<double>(), std::nullopt};
      if (f.contains("restart_at")) spec.restart_at = f["restart_at"].get<double>();
      s.faults.push_back(spec);
    }
    if (j.contains("ddos")) {
      DdosSpec d;
      const auto& dj = j["ddos"];
      if (dj.contains("steps")) d.steps = dj["steps"].get<std::vector<std::size_t>>();
      d.step_seconds = dj.value("step_seconds", d.step_seconds);
      d.warmup_seconds = dj.value("warmup_seconds", d.warmup_seconds);
      d.legit_clients = dj.value("legit_clients", d.legit_clients);
      d.attacker_threads = dj.value("attacker_threads", d.attacker_threads);
      s.ddos = d;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::scenario_invalid, std::string("scenario: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::scenario_invalid) throw;
    throw Error(ErrorCode::scenario_invalid, e.what());
  }
  s.validate();
  return s;
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string outcome_name(const std::exception* e) {
  if (!e) return "ok";
  if (auto err = dynamic_cast<const Error*>(e)) return std::string(to_string(err->code()));
  return "exception";
}

// --- attackers -----------------------------------------------------------------

AttackerWorkload::AttackerWorkload(AttackKind kind, CaId ltca, CaId pca)
    : kind_(kind),
      ltca_(std::move(ltca)),
      pca_(std::move(pca)),
      attacker_(crypto::generate_keypair()),
      forger_(crypto::generate_keypair()) {
  // Forged LTC: claims the real LTCA as issuer but carries the forger's signature.
  fake_ltc_.serial = crypto::random_u64();
  fake_ltc_.subject_id = "attacker";
  fake_ltc_.public_key = attacker_.public_key;
  fake_ltc_.validity = Interval{0, TimePoint{1} << 40};
  fake_ltc_.issuer = ltca_;
  sign_in_place(fake_ltc_, forger_.private_key);

  fake_ticket_.serial = crypto::random_u64();
  fake_ticket_.interval = Interval{0, TimePoint{1} << 40};
  fake_ticket_.tkt_expiry = fake_ticket_.interval.end;
  fake_ticket_.issuer = ltca_;
  sign_in_place(fake_ticket_, forger_.private_key);
  csr_ = make_csr(attacker_);
}

wire::Envelope AttackerWorkload::next(TimePoint now) {
  ++count_;
  if (kind_ == AttackKind::fake_ltc) {
    msg::TicketRequest req;
    crypto::random_bytes(req.target_digest.bytes);
    req.interval = Interval{now, now + 3600};
    req.ltc = fake_ltc_;
    // Every other request uses an issuer nobody trusts.
    if (count_ % 2 == 0) req.ltc.issuer = "ltca-forged";
    return rpc::make_request(wire::MsgType::ticket_req, canonical_encode(req), now, &attacker_.private_key);
  }
  msg::PseudonymRequest req;
  crypto::random_bytes(req.rnd.bytes);
  req.interval = Interval{now, now + 300};
  req.ticket = fake_ticket_;
  req.csrs = {csr_};
  return rpc::make_request(wire::MsgType::psnym_req, canonical_encode(req), now);
}

std::vector<std::pair<double, wire::Envelope>> AttackerWorkload::stream(double rate_per_second,
                                                                        double duration_seconds, TimePoint now) {
  std::vector<std::pair<double, wire::Envelope>> out;
  if (rate_per_second <= 0) return out;
  auto n = static_cast<std::size_t>(std::floor(duration_seconds * rate_per_second));
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / rate_per_second;
    out.emplace_back(t, next(now + static_cast<TimePoint>(t)));
  }
  return out;
}

// --- run -----------------------------------------------------------------------

namespace {

enum class EventKind { native, roam, attack, revoke, kill, restart };

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::native: return "native";
    case EventKind::roam: return "roam";
    case EventKind::attack: return "attack";
    case EventKind::revoke: return "revoke";
    case EventKind::kill: return "kill";
    case EventKind::restart: return "restart";
  }
  return "?";
}

std::string name(ErrorCode c) { return std::string(vpki::to_string(c)); }

bool attack_rejected(AttackKind kind, const std::string& outcome) {
  if (kind == AttackKind::fake_ltc)
    return outcome == name(ErrorCode::bad_signature) || outcome == name(ErrorCode::unknown_issuer);
  return outcome == name(ErrorCode::ticket_invalid);
}

struct Event {
  double t = 0;
  EventKind kind = EventKind::native;
  std::size_t who = 0;  // vehicle, attacker or fault index
  std::size_t domain = 0;
  std::size_t pca = 0;
  std::uint64_t pick = 0;  // random draw for revocation targets
};

struct Delivered {
  privacy::PseudonymRef ref;
  Interval interval;
  std::string owner;
  TimePoint received_at = 0;
};

struct SimVehicle {
  std::string id;
  std::size_t home = 0;
  std::unique_ptr<VehicleClient> client;
  TimePoint next_free = 0;
  std::set<privacy::PseudonymRef> seen;
};

/// Per-thread output, merged after the run.
struct Shard {
  std::vector<MetricRecord> records;
  std::vector<Delivered> delivered;
  std::vector<std::string> violations;
};

std::vector<Event> schedule(const Scenario& s) {
  std::mt19937_64 rng(s.seed);
  std::vector<Event> events;
  auto domains = s.topology.domains.size();
  if (s.requests_per_hour > 0) {
    std::exponential_distribution<double> gap(s.requests_per_hour / 3600.0);
    std::uniform_real_distribution<double> coin(0, 1);
    for (std::size_t v = 0; v < s.vehicles; ++v) {
      auto home = v % domains;
      for (double t = gap(rng); t < s.duration_seconds; t += gap(rng)) {
        Event e{t, EventKind::native, v, home, 0, 0};
        if (s.roaming_fraction > 0 && coin(rng) < s.roaming_fraction) {
          e.kind = EventKind::roam;
          e.domain = (home + 1 + rng() % (domains - 1)) % domains;
        }
        e.pca = rng() % s.topology.domains[e.domain].pcas;
        events.push_back(e);
      }
    }
  }
  if (s.attackers > 0 && s.attacker_rate > 0) {
    std::exponential_distribution<double> gap(s.attacker_rate);
    for (std::size_t a = 0; a < s.attackers; ++a)
      for (double t = gap(rng); t < s.duration_seconds; t += gap(rng))
        events.push_back(Event{t, EventKind::attack, a, a % domains, 0, 0});
  }
  if (s.revocations > 0) {
    std::uniform_real_distribution<double> when(s.duration_seconds / 4, s.duration_seconds);
    for (std::size_t i = 0; i < s.revocations; ++i) events.push_back(Event{when(rng), EventKind::revoke, i, 0, 0, rng()});
  }
  for (std::size_t f = 0; f < s.faults.size(); ++f) {
    events.push_back(Event{s.faults[f].at, EventKind::kill, f, 0, 0, 0});
    if (s.faults[f].restart_at) events.push_back(Event{*s.faults[f].restart_at, EventKind::restart, f, 0, 0, 0});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return events;
}

class Runner {
 public:
  Runner(const Scenario& s, const Clock& clock, std::size_t shards)
      : s_(s), dep_(s.topology, clock, options(s)), shards_(shards) {
    for (std::size_t v = 0; v < s.vehicles; ++v) {
      SimVehicle sv;
      sv.id = "veh-" + std::to_string(v);
      sv.home = v % s.topology.domains.size();
      vehicles_.push_back(std::move(sv));
    }
    for (auto& v : vehicles_) v.client = dep_.enroll(domain(v.home), v.id);
    for (std::size_t a = 0; a < s.attackers; ++a) {
      auto d = domain(a % s.topology.domains.size());
      attackers_.push_back(std::make_unique<AttackerWorkload>(s.attacker_kinds[a % s.attacker_kinds.size()],
                                                              ltca_id(d), pca_id(d, 0)));
    }
    for (const auto& d : s.topology.domains)
      for (const auto& p : dep_.pca_ids(d.name))
        dep_.pca_group(p).balancer->start_health_checks(
            std::chrono::milliseconds(static_cast<long>(s.balancer_probe_seconds * 1000)));
  }

  ~Runner() {
    for (const auto& d : s_.topology.domains)
      for (const auto& p : dep_.pca_ids(d.name)) dep_.pca_group(p).balancer->stop_health_checks();
  }

  static DeploymentOptions options(const Scenario& s) {
    DeploymentOptions o;
    o.server_workers = s.server_workers;
    if (o.server_workers == 0 && (!s.faults.empty() || s.mode == "realtime")) o.server_workers = 2;
    return o;
  }

  const std::string& domain(std::size_t i) const { return s_.topology.domains[i].name; }
  Deployment& deployment() { return dep_; }
  std::vector<SimVehicle>& vehicles() { return vehicles_; }
  Shard& shard(std::size_t i) { return shards_[i]; }

  void record(Shard& sh, const std::string& op, const std::string& server, std::int64_t start, std::int64_t end,
              const std::string& outcome) {
    sh.records.push_back(MetricRecord{op, server, start, end, outcome});
  }

  /// One legitimate acquisition. Returns true when pseudonyms were pooled.
  bool request(SimVehicle& v, const Event& e, Shard& sh) {
    auto now = dep_.clock().now();
    const auto& home_policy = s_.topology.domains[v.home].policy;
    auto tau = home_policy.pseudonym_lifetime_seconds;
    auto start = std::max(floor_to_grid(now, tau, home_policy.grid_epoch), v.next_free);
    Interval want{start, start + static_cast<TimePoint>(s_.pseudonyms_per_request) * tau};
    auto pca = pca_id(domain(e.domain), e.pca);
    auto home_ltca = ltca_id(domain(v.home));
    bool ok = false;
    std::int64_t spent = 0;
    auto t_begin = monotonic_us();

    auto timed = [&](const std::string& op, const std::string& server, auto&& fn) {
      auto t0 = monotonic_us();
      try {
        fn();
      } catch (const std::exception& ex) {
        auto t1 = monotonic_us();
        record(sh, op, server, t0, t1, outcome_name(&ex));
        return false;
      }
      auto t1 = monotonic_us();
      spent += t1 - t0;
      record(sh, op, server, t0, t1, "ok");
      return true;
    };

    auto pseudonyms = [&](const std::string& op) {
      auto keys = prepare_keys(s_.pseudonyms_per_request);
      auto t0 = monotonic_us();
      std::string outcome = "ok";
      try {
        try {
          v.client->acquire_pseudonyms(pca, want, std::move(keys));
        } catch (const Error& ex) {
          if (ex.code() != ErrorCode::transport_error) throw;
          // One retry; the balancer has marked the failed replica down.
          v.client->acquire_pseudonyms(pca, want, s_.pseudonyms_per_request);
        }
      } catch (const std::exception& ex) {
        outcome = outcome_name(&ex);
      }
      auto t1 = monotonic_us();
      record(sh, op, pca, t0, t1, outcome);
      if (outcome == "ok") spent += t1 - t0;
      return outcome == "ok";
    };

    if (e.kind == EventKind::native) {
      if (!timed("ticket", home_ltca, [&] { v.client->acquire_ticket(pca, want); })) return false;
      v.next_free = snap_outward(want, home_policy.ticket_interval_seconds, home_policy.grid_epoch).end;
      ok = pseudonyms("pseudonyms");
      if (ok) record(sh, "acquire", pca, t_begin, t_begin + spent, "ok");
    } else {
      auto foreign_ltca = ltca_id(domain(e.domain));
      if (!timed("ftkt", home_ltca, [&] { v.client->request_foreign_ticket(foreign_ltca, want); })) return false;
      v.next_free = snap_outward(want, home_policy.ticket_interval_seconds, home_policy.grid_epoch).end;
      if (!timed("ntkt", foreign_ltca, [&] { v.client->exchange_foreign_ticket(pca, want); })) return false;
      ok = pseudonyms("pseudonyms_foreign");
      if (ok) record(sh, "roam", pca, t_begin, t_begin + spent, "ok");
    }
    if (ok) collect(v, sh, now);
    return ok;
  }

  void collect(SimVehicle& v, Shard& sh, TimePoint now) {
    const auto& pool = v.client->pool();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& p = pool[i].pseudonym;
      privacy::PseudonymRef ref{p.issuer, p.serial};
      if (v.seen.insert(ref).second) sh.delivered.push_back(Delivered{ref, p.interval, v.id, now});
      if (i > 0 && pool[i - 1].pseudonym.interval.end > p.interval.start)
        sh.violations.push_back("pool overlap at " + v.id);
    }
    v.client->prune(now);
  }

  void attack(const Event& e, Shard& sh) {
    auto& w = *attackers_[e.who];
    auto now = dep_.clock().now();
    auto env = w.next(now);
    auto t0 = monotonic_us();
    std::string outcome = "ok";
    try {
      rpc::Client client(dep_.resolver()(w.target()), dep_.trust(), dep_.clock());
      client.call_envelope(env, w.target());
    } catch (const std::exception& ex) {
      outcome = outcome_name(&ex);
    }
    auto t1 = monotonic_us();
    record(sh, "attack_" + std::string(to_string(w.kind())), w.target(), t0, t1, outcome);
    if (!attack_rejected(w.kind(), outcome) && outcome != name(ErrorCode::transport_error))
      sh.violations.push_back("attacker request to " + w.target() + " ended " + outcome);
  }

  void fault(const Event& e) {
    const auto& f = s_.faults[e.who];
    auto host = dep_.host(f.server);
    if (!host) throw Error(ErrorCode::scenario_invalid, "no service instance " + f.server);
    if (e.kind == EventKind::kill) {
      host->kill();
      fault_times_["fault." + f.server + ".kill_us"] = static_cast<double>(monotonic_us());
    } else {
      host->restart();
      fault_times_["fault." + f.server + ".restart_us"] = static_cast<double>(monotonic_us());
      for (const auto& d : s_.topology.domains)
        for (const auto& p : dep_.pca_ids(d.name)) dep_.pca_group(p).balancer->probe_now();
    }
  }

  /// Revokes the pseudonyms of a random delivered pseudonym's ticket through
  /// the RA, then checks the issuer's CRL did not move backwards.
  void revoke(const Event& e, Shard& sh) {
    if (sh.delivered.empty()) return;
    const auto& target = sh.delivered[e.pick % sh.delivered.size()];
    auto t0 = monotonic_us();
    std::string outcome = "ok";
    try {
      dep_.resolve(dep_.domain_of(target.ref.issuer), target.ref.issuer, target.ref.serial, true, false);
    } catch (const std::exception& ex) {
      outcome = outcome_name(&ex);
    }
    record(sh, "revoke", target.ref.issuer, t0, monotonic_us(), outcome);
    check_crl(target.ref.issuer, sh);
  }

  void check_crl(const CaId& pca, Shard& sh) {
    rpc::Client client(dep_.resolver()(pca), dep_.trust(), dep_.clock());
    auto t0 = monotonic_us();
    try {
      auto body = client.call(wire::MsgType::crl_req, canonical_encode(msg::CrlRequest{}), pca);
      auto crl = canonical_decode<msg::CrlResponse>(body).crl;
      record(sh, "crl", pca, t0, monotonic_us(), "ok");
      auto& last = crls_[pca];
      if (crl.sequence < last.sequence) sh.violations.push_back("CRL sequence of " + pca + " went backwards");
      if (!std::includes(crl.entries.begin(), crl.entries.end(), last.entries.begin(), last.entries.end()))
        sh.violations.push_back("CRL of " + pca + " dropped entries");
      last = crl;
    } catch (const std::exception& ex) {
      record(sh, "crl", pca, t0, monotonic_us(), outcome_name(&ex));
    }
  }

  const std::map<std::string, double>& fault_times() const { return fault_times_; }
  std::mutex& fault_mu() { return fault_mu_; }

 private:
  const Scenario& s_;
  Deployment dep_;
  std::vector<SimVehicle> vehicles_;
  std::vector<std::unique_ptr<AttackerWorkload>> attackers_;
  std::vector<Shard> shards_;
  std::map<CaId, RevocationList> crls_;
  std::map<std::string, double> fault_times_;
  std::mutex fault_mu_;
};

void sybil_scan(const std::vector<LtcaSnapshot>& ltcas, const std::vector<Delivered>& delivered,
                std::vector<std::string>& violations) {
  // Two credentials of one subject conflict if they overlap at an instant
  // after both were issued.
  auto conflict = [](const Interval& a, TimePoint ia, const Interval& b, TimePoint ib) {
    auto lo = std::max({a.start, b.start, ia, ib});
    auto hi = std::min(a.end, b.end);
    return lo < hi;
  };
  for (const auto& l : ltcas) {
    std::map<std::string, std::vector<const TicketLedgerEntry*>> by_subject;
    for (const auto& t : l.tickets) by_subject[t.subject_id].push_back(&t);
    for (auto& [subject, list] : by_subject) {
      std::sort(list.begin(), list.end(), [](auto a, auto b) { return a->interval.start < b->interval.start; });
      for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = i + 1; j < list.size() && list[j]->interval.start < list[i]->interval.end; ++j)
          if (conflict(list[i]->interval, list[i]->issued_at, list[j]->interval, list[j]->issued_at))
            violations.push_back("two live tickets for " + subject + " at " + l.ca_id);
    }
  }
  std::map<std::string, std::vector<const Delivered*>> by_owner;
  for (const auto& d : delivered) by_owner[d.owner].push_back(&d);
  for (auto& [owner, list] : by_owner) {
    std::sort(list.begin(), list.end(), [](auto a, auto b) { return a->interval.start < b->interval.start; });
    for (std::size_t i = 0; i < list.size(); ++i)
      for (std::size_t j = i + 1; j < list.size() && list[j]->interval.start < list[i]->interval.end; ++j)
        if (conflict(list[i]->interval, list[i]->received_at, list[j]->interval, list[j]->received_at))
          violations.push_back("two valid pseudonyms for " + owner);
  }
}

void resolution_check(Deployment& dep, const std::vector<Delivered>& delivered, double fraction, std::uint64_t seed,
                      Shard& sh) {
  if (delivered.empty() || fraction <= 0) return;
  std::mt19937_64 rng(seed ^ 0x7265736f6c7665ULL);
  std::bernoulli_distribution take(fraction);
  std::vector<const Delivered*> sample;
  for (const auto& d : delivered)
    if (take(rng)) sample.push_back(&d);
  if (sample.empty()) sample.push_back(&delivered[rng() % delivered.size()]);
  for (const auto* d : sample) {
    auto t0 = monotonic_us();
    std::string outcome = "ok";
    try {
      auto res = dep.resolve(dep.domain_of(d->ref.issuer), d->ref.issuer, d->ref.serial);
      if (!res.complete || res.subject_id != d->owner) {
        outcome = "wrong_owner";
        sh.violations.push_back("resolution of " + d->ref.str() + " gave '" + res.subject_id + "', expected " +
                                d->owner);
      }
    } catch (const std::exception& ex) {
      outcome = outcome_name(&ex);
      sh.violations.push_back("resolution of " + d->ref.str() + " failed: " + outcome);
    }
    sh.records.push_back(MetricRecord{"resolve", "ra-" + dep.domain_of(d->ref.issuer), t0, monotonic_us(), outcome});
  }
}

void finish(Runner& runner, const Scenario& s, std::size_t shard_count, RunResult& result) {
  auto& dep = runner.deployment();
  // Crashed servers come back before the post-run audit.
  for (const auto& f : s.faults)
    if (auto h = dep.host(f.server); h && !h->alive()) h->restart();
  for (const auto& d : s.topology.domains)
    for (const auto& p : dep.pca_ids(d.name)) dep.pca_group(p).balancer->probe_now();

  std::vector<Delivered> delivered;
  std::vector<MetricRecord> records;
  for (std::size_t i = 0; i < shard_count; ++i) {
    auto& sh = runner.shard(i);
    delivered.insert(delivered.end(), sh.delivered.begin(), sh.delivered.end());
    records.insert(records.end(), sh.records.begin(), sh.records.end());
    result.report.monitor_violations.insert(result.report.monitor_violations.end(), sh.violations.begin(),
                                            sh.violations.end());
  }
  std::sort(delivered.begin(), delivered.end(), [](const Delivered& a, const Delivered& b) {
    return std::tie(a.interval.start, a.ref) < std::tie(b.interval.start, b.ref);
  });

  result.ltca_snapshots = dep.ltca_snapshots();
  result.pca_snapshots = dep.pca_snapshots();
  sybil_scan(result.ltca_snapshots, delivered, result.report.monitor_violations);

  Shard audit;
  resolution_check(dep, delivered, s.resolution_sample, s.seed, audit);
  records.insert(records.end(), audit.records.begin(), audit.records.end());
  result.report.monitor_violations.insert(result.report.monitor_violations.end(), audit.violations.begin(),
                                          audit.violations.end());

  std::stable_sort(records.begin(), records.end(),
                   [](const MetricRecord& a, const MetricRecord& b) { return a.start_us < b.start_us; });
  result.report.records = std::move(records);
  for (const auto& d : delivered) result.transcript.add(privacy::Observation{d.ref, d.interval}, d.owner);
  result.transcript.sort();
  result.pseudonyms_issued = delivered.size();
  result.report.scalars["pseudonyms_delivered"] = static_cast<double>(delivered.size());
  for (const auto& [k, v] : runner.fault_times()) result.report.scalars[k] = v;
}

RunResult run_virtual(const Scenario& s) {
  RunResult result;
  auto events = schedule(s);
  ManualClock clock(s.origin);
  Runner runner(s, clock, 1);
  auto& sh = runner.shard(0);
  result.report.scalars["run_start_us"] = static_cast<double>(monotonic_us());
  for (const auto& e : events) {
    clock.advance_to(s.origin + static_cast<TimePoint>(std::floor(e.t)));
    std::ostringstream line;
    line << static_cast<TimePoint>(std::floor(e.t)) << ' ' << to_string(e.kind) << ' ' << e.who;
    result.event_log.push_back(line.str());
    switch (e.kind) {
      case EventKind::native:
      case EventKind::roam:
        runner.request(runner.vehicles()[e.who], e, sh);
        break;
      case EventKind::attack:
        runner.attack(e, sh);
        break;
      case EventKind::revoke:
        runner.revoke(e, sh);
        break;
      case EventKind::kill:
      case EventKind::restart:
        runner.fault(e);
        break;
    }
  }
  clock.advance_to(s.origin + static_cast<TimePoint>(std::ceil(s.duration_seconds)));
  finish(runner, s, 1, result);
  return result;
}

RunResult run_realtime(const Scenario& s) {
  RunResult result;
  auto events = schedule(s);
  ScaledClock clock(s.origin, s.time_scale);
  auto workers = s.clients;
  auto attack_threads = s.attackers > 0 ? std::min<std::size_t>(s.attackers, s.clients) : 0;
  Runner runner(s, clock, workers + attack_threads);

  std::vector<std::vector<Event>> queues(workers + attack_threads);
  std::vector<Event> faults;
  for (const auto& e : events) {
    std::ostringstream line;
    line << static_cast<TimePoint>(std::floor(e.t)) << ' ' << to_string(e.kind) << ' ' << e.who;
    result.event_log.push_back(line.str());
    if (e.kind == EventKind::native || e.kind == EventKind::roam)
      queues[e.who % workers].push_back(e);
    else if (e.kind == EventKind::attack)
      queues[workers + e.who % attack_threads].push_back(e);
    else
      faults.push_back(e);
  }

  result.report.scalars["run_start_us"] = static_cast<double>(monotonic_us());
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < queues.size(); ++w)
    threads.emplace_back([&, w] {
      auto& sh = runner.shard(w);
      for (const auto& e : queues[w]) {
        std::this_thread::sleep_until(clock.real_deadline(e.t));
        try {
          if (e.kind == EventKind::attack)
            runner.attack(e, sh);
          else
            runner.request(runner.vehicles()[e.who], e, sh);
        } catch (const std::exception& ex) {
          sh.violations.push_back(std::string("harness error: ") + ex.what());
        }
      }
    });
  for (const auto& e : faults) {
    std::this_thread::sleep_until(clock.real_deadline(e.t));
    runner.fault(e);
  }
  std::this_thread::sleep_until(clock.real_deadline(s.duration_seconds));
  for (auto& t : threads) t.join();
  finish(runner, s, queues.size(), result);
  return result;
}

RunResult run_ddos(const Scenario& s) {
  RunResult result;
  const auto& d = *s.ddos;
  ScaledClock clock(s.origin, 1);
  auto legit = d.legit_clients;
  auto threads_n = d.attacker_threads;
  auto sc = s;
  sc.attackers = 0;
  Runner runner(sc, clock, legit + threads_n);

  std::atomic<bool> stop{false};
  std::atomic<std::size_t> attackers{0};
  std::atomic<std::uint64_t> served{0};
  std::vector<std::thread> threads;
  const auto dom = runner.domain(0);

  for (std::size_t c = 0; c < legit; ++c)
    threads.emplace_back([&, c] {
      auto& sh = runner.shard(c);
      auto& vs = runner.vehicles();
      std::size_t k = c;
      while (!stop.load()) {
        auto& v = vs[k];
        k += legit;
        if (k >= vs.size()) k = c;
        Event e{0, EventKind::native, 0, v.home, 0, 0};
        try {
          if (runner.request(v, e, sh)) served.fetch_add(1);
        } catch (const std::exception& ex) {
          sh.violations.push_back(std::string("harness error: ") + ex.what());
        }
      }
    });

  std::atomic<std::uint64_t> attack_sent{0};
  for (std::size_t a = 0; a < threads_n; ++a)
    threads.emplace_back([&, a] {
      auto& sh = runner.shard(legit + a);
      AttackerWorkload w(s.attacker_kinds[a % s.attacker_kinds.size()], ltca_id(dom), pca_id(dom, 0));
      auto next = std::chrono::steady_clock::now();
      while (!stop.load()) {
        double rate = static_cast<double>(attackers.load()) * s.attacker_rate / static_cast<double>(threads_n);
        if (rate <= 0) {
          std::this_thread::sleep_for(std::chrono::milliseconds(20));
          next = std::chrono::steady_clock::now();
          continue;
        }
        auto now = std::chrono::steady_clock::now();
        if (next < now - std::chrono::seconds(1)) next = now;  // bounded backlog
        std::this_thread::sleep_until(next);
        next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(1.0 / rate));
        auto env = w.next(clock.now());
        auto t0 = monotonic_us();
        std::string outcome = "ok";
        try {
          rpc::Client client(runner.deployment().resolver()(w.target()), runner.deployment().trust(), clock);
          client.call_envelope(env, w.target());
        } catch (const std::exception& ex) {
          outcome = outcome_name(&ex);
        }
        attack_sent.fetch_add(1);
        sh.records.push_back(MetricRecord{"attack_" + std::string(to_string(w.kind())), w.target(), t0,
                                          monotonic_us(), outcome});
        if (!attack_rejected(w.kind(), outcome)) sh.violations.push_back("attacker request to " + w.target() + " ended " + outcome);
      }
    });

  result.report.scalars["run_start_us"] = static_cast<double>(monotonic_us());
  auto& series = result.report.series["legit_rps"];
  auto& attack_series = result.report.series["attack_rps"];
  for (auto step : d.steps) {
    attackers.store(step);
    std::this_thread::sleep_for(std::chrono::duration<double>(d.warmup_seconds));
    auto c0 = served.load();
    auto a0 = attack_sent.load();
    std::this_thread::sleep_for(std::chrono::duration<double>(d.step_seconds));
    series.emplace_back(static_cast<double>(step), static_cast<double>(served.load() - c0) / d.step_seconds);
    attack_series.emplace_back(static_cast<double>(step),
                               static_cast<double>(attack_sent.load() - a0) / d.step_seconds);
  }
  stop.store(true);
  for (auto& t : threads) t.join();
  auto audit = s;
  audit.resolution_sample = std::min(s.resolution_sample, 0.01);
  finish(runner, audit, legit + threads_n, result);
  return result;
}

}  // namespace

RunResult run(const Scenario& scenario) {
  scenario.validate();
  try {
    if (scenario.ddos) return run_ddos(scenario);
    if (scenario.mode == "realtime") return run_realtime(scenario);
    return run_virtual(scenario);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::scenario_invalid || e.code() == ErrorCode::io_error) throw;
    throw Error(ErrorCode::service_spawn_failure, e.what());
  }
}

std::vector<std::string> export_run(const RunResult& result, const std::string& dir) {
  auto written = export_report(result.report, dir);
  auto tpath = (fs::path(dir) / "transcript.json").string();
  result.transcript.save(tpath);
  written.push_back(tpath);
  auto snaps = fs::path(dir) / "snapshots";
  fs::create_directories(snaps);
  for (const auto& s : result.ltca_snapshots) {
    auto p = (snaps / (s.ca_id + ".snap")).string();
    write_file(p, encode_file(s));
    written.push_back(p);
  }
  for (const auto& s : result.pca_snapshots) {
    auto p = (snaps / (s.ca_id + ".r" + std::to_string(s.replica) + ".snap")).string();
    write_file(p, encode_file(s));
    written.push_back(p);
  }
  return written;
}

}  // namespace vpki::sim
