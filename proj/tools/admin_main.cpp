#include <CLI11.hpp>
#include <iostream>

#include "common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deployment administration"};
  app.require_subcommand(1);
  std::string topology, out, host = "127.0.0.1";
  std::uint16_t base_port = 7400;
  auto init = app.add_subcommand("init-deployment", "Generate keys, certificates, trust store and manifest");
  init->add_option("--topology", topology, "Topology JSON")->required();
  init->add_option("--out", out)->required();
  init->add_option("--host", host);
  init->add_option("--base-port", base_port);
  CLI11_PARSE(app, argc, argv);

  return tools::guarded([&] {
    auto t = vpki::Topology::from_json_text(tools::slurp(topology));
    for (const auto& f : vpki::write_deployment_files(t, out, host, base_port)) std::cout << f << "\n";
    return 0;
  });
}
