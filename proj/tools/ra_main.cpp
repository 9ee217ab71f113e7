#include <CLI11.hpp>

#include "common.hpp"
#include "vpki/directory.hpp"
#include "vpki/ra.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Resolution authority"};
  std::string id, listen, trust, state, directory, operators;
  std::size_t workers = 2;
  app.add_option("--id", id, "Authority id, e.g. ra-A")->required();
  app.add_option("--trust", trust, "Trust store file")->required();
  app.add_option("--directory", directory, "Directory address host:port")->required();
  app.add_option("--listen", listen, "host:port to serve on");
  app.add_option("--state", state, "State file; must hold this authority's key record");
  app.add_option("--operators", operators, "Operator public keys allowed to request resolution");
  app.add_option("--workers", workers);

  std::string pseudonym, justification = "operator request", op_key;
  bool revoke = false, revoke_ltc = false;
  auto resolve = app.add_subcommand("resolve", "Ask the running RA to resolve a pseudonym");
  resolve->add_option("--pseudonym", pseudonym, "issuer:serial, e.g. pca-A-1:42")->required();
  resolve->add_option("--operator-key", op_key, "Hex scalar of the operator key")->required();
  resolve->add_option("--justification", justification);
  resolve->add_flag("--revoke", revoke, "Also revoke the pseudonyms issued on the same ticket");
  resolve->add_flag("--revoke-ltc", revoke_ltc, "Also revoke the owner's LTC");
  CLI11_PARSE(app, argc, argv);

  return tools::guarded([&] {
    auto ts = tools::load_trust(trust);
    static vpki::SystemClock clock;
    vpki::DirectoryClient dir(
        std::make_shared<vpki::transport::TcpEndpoint>(vpki::transport::HostPort::parse(directory)),
        vpki::directory_id(), ts, clock);

    if (*resolve) {
      auto colon = pseudonym.rfind(':');
      if (colon == std::string::npos) throw vpki::Error(vpki::ErrorCode::invalid_argument, "expected issuer:serial");
      auto pca = pseudonym.substr(0, colon);
      auto serial = std::stoull(pseudonym.substr(colon + 1));
      auto key = vpki::load_operator_key(op_key);
      vpki::rpc::Client client(dir.tcp_resolver()(id), ts, clock);
      vpki::msg::ResolveRequest req{pca, serial, justification, revoke, revoke_ltc};
      auto res = vpki::canonical_decode<vpki::msg::ResolveResponse>(
          client.call(vpki::wire::MsgType::resolve_req, vpki::canonical_encode(req), id, &key));
      nlohmann::json j{{"complete", res.complete},
                       {"subject_id", res.subject_id},
                       {"home_ltca", res.home_ltca},
                       {"ticket_issuer", res.ticket_issuer},
                       {"ticket_serial", res.ticket_serial},
                       {"foreign_ticket_serial", res.foreign_ticket_serial},
                       {"ltc_revoked", res.ltc_revoked}};
      std::cout << j.dump(2) << "\n";
      return res.complete ? 0 : 1;
    }

    if (listen.empty() || state.empty())
      throw vpki::Error(vpki::ErrorCode::invalid_argument, "serving needs --listen and --state");
    auto log = std::make_shared<vpki::StateLog>(state);
    auto key = vpki::load_key_record(*log, id);
    vpki::RaConfig cfg{id, operators.empty() ? std::vector<vpki::PublicKey>{} : tools::load_public_keys(operators)};
    auto svc = std::make_shared<vpki::RaService>(std::move(cfg), std::move(key), ts, clock, dir.tcp_resolver(), log);
    return tools::serve_forever(id, listen, svc, workers);
  });
}
