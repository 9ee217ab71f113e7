#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vpki {

struct MetricRecord {
  std::string op;
  std::string server;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  std::string outcome;  // "ok" or an error code name

  std::int64_t latency_us() const { return end_us - start_us; }
  bool ok() const { return outcome == "ok"; }
};

/// One shard per worker; shards are appended without locking and merged
/// once the run is over.
class MetricsCollector {
 public:
  explicit MetricsCollector(std::size_t workers) : shards_(workers) {}
  void record(std::size_t worker, MetricRecord r) { shards_[worker].push_back(std::move(r)); }
  /// Records of all shards, ordered by start time.
  std::vector<MetricRecord> merge() const;

 private:
  std::vector<std::vector<MetricRecord>> shards_;
};

struct LatencySummary {
  std::size_t count = 0;
  double mean_ms = 0, p50_ms = 0, p90_ms = 0, p95_ms = 0, p99_ms = 0, max_ms = 0;
  std::vector<double> cdf_ms;  // 101 points: value at p = 0, 0.01, ..., 1.0
};

/// Nearest-rank percentile over milliseconds; `p` in [0, 1]. Empty input gives 0.
double percentile(std::vector<double> sorted_ms, double p);
LatencySummary summarize(const std::vector<double>& latencies_ms);

struct MetricsReport {
  std::vector<MetricRecord> records;
  /// Free-form series and counters the scenario wants to publish.
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::vector<std::string> monitor_violations;

  /// Latencies of successful records of `op`.
  std::vector<double> latencies_ms(const std::string& op) const;
  std::map<std::string, std::size_t> outcome_counts(const std::string& op) const;
};

std::string to_csv(const std::vector<MetricRecord>& records);
std::string summary_json(const MetricsReport& report);

/// Writes latencies.csv, summary.json and one <op>.cdf.dat per op into `dir`.
/// Returns the files written.
std::vector<std::string> export_report(const MetricsReport& report, const std::string& dir);

}  // namespace vpki
