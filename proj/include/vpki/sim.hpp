#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vpki/deployment.hpp"
#include "vpki/metrics.hpp"
#include "vpki/privacy.hpp"

namespace vpki::sim {

struct FaultSpec {
  std::string server;  // service instance name, e.g. "pca-A-1.r0"
  double at = 0;       // seconds after the run starts
  std::optional<double> restart_at;
};

enum class AttackKind { fake_ltc, fake_ticket };
std::string_view to_string(AttackKind k);

/// Stepped attacker ramp against closed-loop legitimate clients.
struct DdosSpec {
  std::vector<std::size_t> steps{0, 500, 1000, 1500, 2000};
  double step_seconds = 5;
  double warmup_seconds = 1;
  std::size_t legit_clients = 4;
  std::size_t attacker_threads = 16;
};

struct Scenario {
  std::size_t vehicles = 200;
  double requests_per_hour = 6;
  std::size_t pseudonyms_per_request = 100;
  double duration_seconds = 600;
  Topology topology;
  double roaming_fraction = 0;

  std::size_t attackers = 0;
  double attacker_rate = 0.1;  // requests per second per attacker
  std::vector<AttackKind> attacker_kinds{AttackKind::fake_ltc, AttackKind::fake_ticket};

  std::vector<FaultSpec> faults;
  std::uint64_t seed = 1;

  /// "virtual": single-threaded, clock jumps from event to event.
  /// "realtime": client threads pace requests on a scaled wall clock.
  std::string mode = "virtual";
  double time_scale = 1;
  std::size_t clients = 8;
  std::size_t server_workers = 0;
  double balancer_probe_seconds = 1;

  double resolution_sample = 0.01;
  std::size_t revocations = 0;
  TimePoint origin = 1699999200;
  std::optional<DdosSpec> ddos;

  /// Throws ScenarioInvalid.
  void validate() const;
  static Scenario from_json_text(const std::string& text);
  static Scenario load(const std::string& path);
};

struct RunResult {
  MetricsReport report;
  privacy::Transcript transcript;
  std::vector<LtcaSnapshot> ltca_snapshots;
  std::vector<PcaSnapshot> pca_snapshots;
  /// One line per scheduled event in execution order, e.g. "120 veh-3 native".
  std::vector<std::string> event_log;
  std::size_t pseudonyms_issued = 0;

  bool ok() const { return report.monitor_violations.empty(); }
};

RunResult run(const Scenario& scenario);

/// Writes latencies.csv, summary.json, CDF files, transcript.json and
/// snapshots/ under `dir`.
std::vector<std::string> export_run(const RunResult& result, const std::string& dir);

/// Forges well-framed requests carrying invalid credentials.
class AttackerWorkload {
 public:
  AttackerWorkload(AttackKind kind, CaId ltca, CaId pca);

  AttackKind kind() const { return kind_; }
  /// Authority the forged requests go to.
  const CaId& target() const { return kind_ == AttackKind::fake_ltc ? ltca_ : pca_; }
  wire::Envelope next(TimePoint now);
  /// Evenly spaced stream over [now, now + duration). Rate 0 gives nothing.
  std::vector<std::pair<double, wire::Envelope>> stream(double rate_per_second, double duration_seconds,
                                                        TimePoint now);

 private:
  AttackKind kind_;
  CaId ltca_, pca_;
  KeyPair attacker_;
  KeyPair forger_;
  LongTermCertificate fake_ltc_;
  Ticket fake_ticket_;
  Csr csr_;
  std::uint64_t count_ = 0;
};

/// Outcome name of an exchange that threw `e`, or "ok".
std::string outcome_name(const std::exception* e);

}  // namespace vpki::sim
