#include <CLI11.hpp>

#include "common.hpp"
#include "vpki/directory.hpp"
#include "vpki/vehicle.hpp"

// Walkthrough file:
// {"subject_id": "veh-1", "target_pca": "pca-A-1", "pseudonyms": 5,
//  "start_offset": 0, "roam": {"ltca": "ltca-B", "pca": "pca-B-1"}}

int main(int argc, char** argv) {
  CLI::App app{"Vehicle client walkthrough"};
  app.require_subcommand(1);
  std::string home, directory, trust_path, operator_key, scenario;
  app.add_option("--home", home, "Home LTCA id")->required();
  app.add_option("--directory", directory, "Directory address host:port")->required();
  app.add_option("--trust", trust_path, "Trust store file")->required();
  app.add_option("--operator-key", operator_key, "Key used to register the vehicle")->required();
  auto run = app.add_subcommand("run-scenario", "Register, then acquire a ticket and pseudonyms");
  run->add_option("file", scenario)->required();
  CLI11_PARSE(app, argc, argv);

  return tools::guarded([&] {
    auto j = nlohmann::json::parse(tools::slurp(scenario));
    auto trust = std::make_shared<vpki::TrustStore>(vpki::TrustStore::decode_file(vpki::read_file(trust_path)));
    static vpki::SystemClock clock;
    vpki::DirectoryClient dir(std::make_shared<vpki::transport::TcpEndpoint>(vpki::transport::HostPort::parse(directory)),
                              vpki::directory_id(), trust, clock);
    auto resolver = dir.tcp_resolver();

    auto subject = j.at("subject_id").get<std::string>();
    auto keys = vpki::crypto::generate_keypair();
    auto op = vpki::load_operator_key(operator_key);
    auto now = clock.now();
    vpki::rpc::Client ltca(resolver(home), trust, clock);
    auto ltc = vpki::register_remote(ltca, home, op, subject, keys, vpki::Interval{now - 60, now + 365 * 86400});
    std::cout << "registered " << subject << " (LTC serial " << ltc.serial << ")\n";

    vpki::VehicleConfig cfg{subject, home, [](const vpki::CaId&) { return vpki::DomainPolicy{}; }};
    if (j.contains("policy")) {
      auto p = vpki::DomainPolicy::from_json_text(j["policy"].dump());
      cfg.policy_for = [p](const vpki::CaId&) { return p; };
    }
    vpki::VehicleClient v(cfg, std::move(keys), ltc, trust, clock, resolver);
    auto policy = cfg.policy_for(home);
    auto n = j.value("pseudonyms", std::size_t{5});
    auto start = vpki::floor_to_grid(now + j.value("start_offset", vpki::TimePoint{0}), policy.pseudonym_lifetime_seconds,
                                     policy.grid_epoch);
    vpki::Interval want{start, start + static_cast<vpki::TimePoint>(n) * policy.pseudonym_lifetime_seconds};

    if (j.contains("roam")) {
      auto got = v.roam(j["roam"].at("ltca").get<std::string>(), j["roam"].at("pca").get<std::string>(), want, n);
      std::cout << "roamed: " << got << " pseudonyms\n";
    } else {
      auto pca = j.at("target_pca").get<std::string>();
      const auto& t = v.acquire_ticket(pca, want);
      std::cout << "ticket " << t.ticket.serial << " [" << t.ticket.interval.start << ", " << t.ticket.interval.end
                << ")\n";
      std::cout << "pooled " << v.acquire_pseudonyms(pca, want, n) << " pseudonyms\n";
    }
    for (const auto& p : v.pool())
      std::cout << "  " << p.pseudonym.issuer << " #" << p.pseudonym.serial << " [" << p.pseudonym.interval.start
                << ", " << p.pseudonym.interval.end << ")\n";
    return 0;
  });
}
