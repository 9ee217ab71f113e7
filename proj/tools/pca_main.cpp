#include <CLI11.hpp>

#include "common.hpp"
#include "vpki/pca.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pseudonym certification authority"};
  std::string id, listen, policy, state, trust;
  std::uint32_t replica = 0;
  std::size_t workers = 4;
  app.add_option("--id", id, "Authority id, e.g. pca-A-1")->required();
  app.add_option("--listen", listen, "host:port")->required();
  app.add_option("--policy", policy, "Domain policy JSON")->required();
  app.add_option("--state", state, "State file; must hold this authority's key record")->required();
  app.add_option("--trust", trust, "Trust store file")->required();
  app.add_option("--replica", replica, "Replica index; replicas of one id share its key");
  app.add_option("--workers", workers, "Handler threads");
  CLI11_PARSE(app, argc, argv);

  return tools::guarded([&] {
    auto ts = tools::load_trust(trust);
    auto log = std::make_shared<vpki::StateLog>(state);
    auto key = vpki::load_key_record(*log, id);
    static vpki::SystemClock clock;
    vpki::PcaConfig cfg{id, tools::domain_of(*ts, id), vpki::DomainPolicy::load(policy), replica};
    auto svc = std::make_shared<vpki::PcaService>(std::move(cfg), std::move(key), ts, clock, log);
    return tools::serve_forever(id, listen, svc, workers);
  });
}
