#include <CLI11.hpp>

#include "common.hpp"
#include "vpki/directory.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Directory of authorities"};
  std::string listen, manifest, trust, state;
  app.add_option("--listen", listen, "host:port")->required();
  app.add_option("--manifest", manifest, "Signed manifest file")->required();
  app.add_option("--trust", trust, "Trust store file")->required();
  app.add_option("--state", state, "File holding the directory's key record")->required();
  CLI11_PARSE(app, argc, argv);

  return tools::guarded([&] {
    auto ts = tools::load_trust(trust);
    auto m = vpki::decode_file<vpki::DirectoryManifest>(vpki::read_file(manifest));
    auto key = vpki::load_key_record(vpki::StateLog(state), vpki::directory_id());
    static vpki::SystemClock clock;
    auto svc = std::make_shared<vpki::DirectoryService>(m, std::move(key), ts, clock);
    return tools::serve_forever(vpki::directory_id(), listen, svc, 2);
  });
}
