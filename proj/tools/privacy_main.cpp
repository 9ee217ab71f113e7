#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "vpki/errors.hpp"
#include "vpki/privacy.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Linkability and collusion analysis"};
  app.require_subcommand(1);
  std::string transcript, snapshots, out = "report.json";
  std::vector<std::string> collude;
  auto analyze = app.add_subcommand("analyze");
  analyze->add_option("--transcript", transcript);
  analyze->add_option("--snapshots", snapshots);
  analyze->add_option("--collude", collude, "Entities, e.g. LTCA_A,PCA_A")->delimiter(',');
  analyze->add_option("--out", out);
  CLI11_PARSE(app, argc, argv);

  using namespace vpki::privacy;
  try {
    nlohmann::json report;
    if (!transcript.empty()) {
      auto t = Transcript::load(transcript);
      auto chains = link_by_lifetime(t);
      report["observations"] = t.observations.size();
      report["chains"] = chains.size();
      if (t.ground_truth) {
        auto s = score_linkage(chains, t);
        report["linkage"] = {{"proposed_links", s.proposed_links}, {"correct_links", s.correct_links},
                             {"true_links", s.true_links},         {"precision", s.precision},
                             {"recall", s.recall},                 {"mean_anonymity_set", s.mean_anonymity_set},
                             {"switch_instants", s.switch_instants}};
      }
    }
    if (!snapshots.empty() && !collude.empty()) {
      auto snaps = Snapshots::load_dir(snapshots);
      report["collusion"] = nlohmann::json::parse(to_json_text(collusion_closure(collude, snaps)));
    }
    std::ofstream f(out);
    f << report.dump(2) << "\n";
    if (!f) throw vpki::Error(vpki::ErrorCode::io_error, "cannot write " + out);
    std::cout << report.dump(2) << "\n";
    return 0;
  } catch (const vpki::Error& e) {
    std::cerr << "error: " << vpki::to_string(e.code()) << ": " << e.detail() << "\n";
    return 2;
  }
}
