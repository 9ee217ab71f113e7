#pragma once

// Helpers shared by the daemon binaries.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "vpki/deployment.hpp"
#include "vpki/errors.hpp"
#include "vpki/state_log.hpp"

namespace tools {

namespace fs = std::filesystem;

inline std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw vpki::Error(vpki::ErrorCode::io_error, "cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::shared_ptr<const vpki::TrustStore> load_trust(const std::string& path) {
  return std::make_shared<vpki::TrustStore>(vpki::TrustStore::decode_file(vpki::read_file(path)));
}

inline std::string domain_of(const vpki::TrustStore& trust, const vpki::CaId& id) {
  auto e = trust.find(id);
  if (!e) throw vpki::Error(vpki::ErrorCode::not_found, "authority " + id + " is not in the trust store");
  return e->domain;
}

/// Files holding one hex-encoded public key per line.
inline std::vector<vpki::PublicKey> load_public_keys(const std::string& path) {
  std::vector<vpki::PublicKey> keys;
  std::istringstream in(slurp(path));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) keys.push_back(vpki::PublicKey{vpki::from_hex(line)});
  return keys;
}

inline std::atomic<bool> g_stop{false};

/// Serves `handler` on `listen` until SIGINT/SIGTERM.
inline int serve_forever(const std::string& name, const std::string& listen,
                         std::shared_ptr<vpki::transport::Handler> handler, std::size_t workers) {
  auto host = std::make_shared<vpki::transport::ServiceHost>(handler, workers, name);
  vpki::transport::TcpServer server(vpki::transport::HostPort::parse(listen),
                                    [host](vpki::ByteView f) { return host->call(f); });
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  std::cerr << name << " listening on " << listen << " (port " << server.port() << ")\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  return 0;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const vpki::Error& e) {
    std::cerr << "error: " << vpki::to_string(e.code()) << ": " << e.detail() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace tools
