#include <CLI11.hpp>
#include <iostream>

#include "vpki/errors.hpp"
#include "vpki/sim.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scenario-driven emulation"};
  app.require_subcommand(1);
  std::string scenario_path, out = "sim-out";
  auto run = app.add_subcommand("run", "Run a scenario and export metrics");
  run->add_option("scenario", scenario_path, "Scenario JSON")->required();
  run->add_option("--out", out, "Output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    auto scenario = vpki::sim::Scenario::load(scenario_path);
    auto result = vpki::sim::run(scenario);
    for (const auto& f : vpki::sim::export_run(result, out)) std::cout << f << "\n";
    std::cout << result.pseudonyms_issued << " pseudonyms delivered, " << result.report.records.size()
              << " records\n";
    const auto& violations = result.report.monitor_violations;
    for (std::size_t i = 0; i < violations.size() && i < 20; ++i) std::cerr << "monitor: " << violations[i] << "\n";
    if (violations.size() > 20) std::cerr << "monitor: ... " << violations.size() - 20 << " more\n";
    return result.ok() ? 0 : 1;
  } catch (const vpki::Error& e) {
    std::cerr << "error: " << vpki::to_string(e.code()) << ": " << e.detail() << "\n";
    return 2;
  }
}
