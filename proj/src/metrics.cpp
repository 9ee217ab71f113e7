#include "vpki/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "vpki/errors.hpp"

namespace vpki {

std::vector<MetricRecord> MetricsCollector::merge() const {
  std::vector<MetricRecord> out;
  for (const auto& s : shards_) out.insert(out.end(), s.begin(), s.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const MetricRecord& a, const MetricRecord& b) { return a.start_us < b.start_us; });
  return out;
}

double percentile(std::vector<double> sorted_ms, double p) {
  if (sorted_ms.empty()) return 0;
  auto n = sorted_ms.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted_ms[rank - 1];
}

LatencySummary summarize(const std::vector<double>& latencies_ms) {
  LatencySummary s;
  auto v = latencies_ms;
  std::sort(v.begin(), v.end());
  s.count = v.size();
  if (!v.empty()) {
    s.mean_ms = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.max_ms = v.back();
  }
  s.p50_ms = percentile(v, 0.50);
  s.p90_ms = percentile(v, 0.90);
  s.p95_ms = percentile(v, 0.95);
  s.p99_ms = percentile(v, 0.99);
  for (int i = 0; i <= 100; ++i) s.cdf_ms.push_back(percentile(v, i / 100.0));
  return s;
}

std::vector<double> MetricsReport::latencies_ms(const std::string& op) const {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.op == op && r.ok()) out.push_back(static_cast<double>(r.latency_us()) / 1000.0);
  return out;
}

std::map<std::string, std::size_t> MetricsReport::outcome_counts(const std::string& op) const {
  std::map<std::string, std::size_t> out;
  for (const auto& r : records)
    if (r.op == op) ++out[r.outcome];
  return out;
}

std::string to_csv(const std::vector<MetricRecord>& records) {
  std::ostringstream os;
  os << "op,server,start_us,end_us,outcome\n";
  for (const auto& r : records)
    os << r.op << ',' << r.server << ',' << r.start_us << ',' << r.end_us << ',' << r.outcome << '\n';
  return os.str();
}

namespace {

std::set<std::string> ops_of(const MetricsReport& report) {
  std::set<std::string> ops;
  for (const auto& r : report.records) ops.insert(r.op);
  return ops;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

}  // namespace

std::string summary_json(const MetricsReport& report) {
  nlohmann::json j;
  j["ops"] = nlohmann::json::object();
  for (const auto& op : ops_of(report)) {
    auto s = summarize(report.latencies_ms(op));
    nlohmann::json o;
    o["count"] = s.count;
    o["mean_ms"] = s.mean_ms;
    o["p50_ms"] = s.p50_ms;
    o["p90_ms"] = s.p90_ms;
    o["p99_ms"] = s.p99_ms;
    o["max_ms"] = s.max_ms;
    nlohmann::json cdf = nlohmann::json::array();
    for (std::size_t i = 0; i < s.cdf_ms.size(); ++i)
      cdf.push_back({{"p", static_cast<double>(i) / 100.0}, {"ms", s.cdf_ms[i]}});
    o["cdf"] = cdf;
    o["outcomes"] = report.outcome_counts(op);
    j["ops"][op] = o;
  }
  j["scalars"] = report.scalars;
  j["series"] = nlohmann::json::object();
  for (const auto& [name, pts] : report.series) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [x, y] : pts) arr.push_back({x, y});
    j["series"][name] = arr;
  }
  j["monitor_violations"] = report.monitor_violations;
  return j.dump(2);
}

std::vector<std::string> export_report(const MetricsReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& text) {
    auto path = fs::path(dir) / name;
    write_text(path, text);
    written.push_back(path.string());
  };
  put("latencies.csv", to_csv(report.records));
  put("summary.json", summary_json(report));
  for (const auto& op : ops_of(report)) {
    auto s = summarize(report.latencies_ms(op));
    std::ostringstream os;
    os << "# latency_ms cumulative_fraction (" << op << ", n=" << s.count << ")\n";
    for (std::size_t i = 0; i < s.cdf_ms.size(); ++i) os << s.cdf_ms[i] << ' ' << static_cast<double>(i) / 100.0 << '\n';
    put(op + ".cdf.dat", os.str());
  }
  return written;
}

}  // namespace vpki
