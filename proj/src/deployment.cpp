#include "vpki/deployment.hpp"

#include <filesystem>
#include <json.hpp>

#include "vpki/errors.hpp"

namespace vpki {

namespace fs = std::filesystem;

std::string rca_id() { return "rca"; }
std::string directory_id() { return "directory"; }
std::string ltca_id(const std::string& domain) { return "ltca-" + domain; }
std::string pca_id(const std::string& domain, std::size_t index) {
  return "pca-" + domain + "-" + std::to_string(index + 1);
}
std::string ra_id(const std::string& domain) { return "ra-" + domain; }

Topology Topology::from_json_text(const std::string& text) {
  Topology t;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& d : j.at("domains")) {
      DomainSpec spec;
      spec.name = d.at("name").get<std::string>();
      spec.pcas = d.value("pcas", std::size_t{1});
      spec.replicas = d.value("replicas", std::size_t{1});
      if (d.contains("policy")) spec.policy = DomainPolicy::from_json_text(d["policy"].dump());
      t.domains.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("topology: ") + e.what());
  }
  return t;
}

const DomainSpec& Topology::domain(const std::string& name) const {
  for (const auto& d : domains)
    if (d.name == name) return d;
  throw Error(ErrorCode::not_found, "domain " + name);
}

namespace {

struct Material {
  KeyPair rca;
  std::map<CaId, KeyPair> keys;
  std::map<CaId, CaCertificate> certs;
  std::shared_ptr<TrustStore> trust;
  KeyPair operator_keys;
};

void check_topology(const Topology& t) {
  if (t.domains.empty()) throw Error(ErrorCode::scenario_invalid, "topology has no domains");
  std::set<std::string> names;
  for (const auto& d : t.domains) {
    if (d.name.empty() || !names.insert(d.name).second)
      throw Error(ErrorCode::scenario_invalid, "domain names must be unique and nonempty");
    if (d.pcas == 0 || d.replicas == 0 || d.replicas > 256)
      throw Error(ErrorCode::scenario_invalid, "each domain needs >= 1 PCA and 1..256 replicas");
    d.policy.validate();
  }
}

Material make_material(const Topology& topology, const Interval& validity) {
  check_topology(topology);
  Material m;
  m.rca = crypto::generate_keypair();
  m.operator_keys = crypto::generate_keypair();
  m.trust = std::make_shared<TrustStore>();
  auto root = make_root_certificate(rca_id(), m.rca, validity);
  m.trust->add_root(root);
  m.certs[rca_id()] = root;

  auto add = [&](const CaId& id, Role role, const std::string& domain) {
    auto kp = crypto::generate_keypair();
    auto cert = issue_ca_certificate(id, role, domain, kp.public_key, validity, rca_id(), m.rca.private_key);
    m.trust->add(cert);
    m.certs[id] = cert;
    m.keys[id] = std::move(kp);
  };
  add(directory_id(), Role::directory, "");
  for (const auto& d : topology.domains) {
    add(ltca_id(d.name), Role::ltca, d.name);
    add(ra_id(d.name), Role::ra, d.name);
    for (std::size_t i = 0; i < d.pcas; ++i) add(pca_id(d.name, i), Role::pca, d.name);
  }
  return m;
}

std::vector<DirectoryEntry> make_entries(const Topology& topology, const Material& m,
                                         const std::map<CaId, std::string>& addresses) {
  std::vector<DirectoryEntry> entries;
  auto entry = [&](const CaId& id, std::vector<CaId> assoc) {
    const auto& cert = m.certs.at(id);
    auto addr = addresses.find(id);
    entries.push_back(DirectoryEntry{id, cert.role, encode_file(cert), cert.domain, std::move(assoc),
                                     addr == addresses.end() ? std::string{} : addr->second});
  };
  entry(rca_id(), {});
  entry(directory_id(), {});
  for (const auto& d : topology.domains) {
    std::vector<CaId> pcas;
    for (std::size_t i = 0; i < d.pcas; ++i) pcas.push_back(pca_id(d.name, i));
    entry(ltca_id(d.name), pcas);
    for (const auto& p : pcas) entry(p, {ltca_id(d.name)});
    auto ra_assoc = pcas;
    ra_assoc.push_back(ltca_id(d.name));
    entry(ra_id(d.name), ra_assoc);
  }
  return entries;
}

}  // namespace

// --- Deployment ------------------------------------------------------------------

Deployment::Deployment(Topology topology, const Clock& clock, DeploymentOptions options)
    : topology_(std::move(topology)), clock_(clock), options_(std::move(options)) {
  auto m = make_material(topology_, options_.validity);
  trust_ = m.trust;
  operator_keys_ = m.operator_keys;
  if (!options_.state_dir.empty()) fs::create_directories(options_.state_dir);

  for (const auto& d : topology_.domains) {
    domain_of_[ltca_id(d.name)] = d.name;
    domain_of_[ra_id(d.name)] = d.name;

    auto ltca = std::make_shared<LtcaService>(LtcaConfig{ltca_id(d.name), d.name, d.policy, {operator_keys_.public_key}},
                                              m.keys.at(ltca_id(d.name)).private_key, trust_, clock_,
                                              state_for(ltca_id(d.name)));
    ltcas_[d.name] = ltca;
    auto s = serve(ltca_id(d.name), ltca);
    routes_[ltca_id(d.name)] = s.endpoint;
    served_[ltca_id(d.name)] = std::move(s);

    for (std::size_t i = 0; i < d.pcas; ++i) {
      auto id = pca_id(d.name, i);
      domain_of_[id] = d.name;
      PcaGroup group;
      group.id = id;
      group.domain = d.name;
      auto revocation = std::make_shared<RevocationState>(id);
      std::vector<std::shared_ptr<transport::Endpoint>> eps;
      for (std::size_t r = 0; r < d.replicas; ++r) {
        auto name = d.replicas == 1 ? id : id + ".r" + std::to_string(r);
        auto pca = std::make_shared<PcaService>(PcaConfig{id, d.name, d.policy, static_cast<std::uint32_t>(r)},
                                                m.keys.at(id).private_key, trust_, clock_, state_for(name), revocation);
        group.replicas.push_back(pca);
        auto served = serve(name, pca);
        if (served.host) group.hosts.push_back(served.host);
        eps.push_back(served.endpoint);
        served_[name] = std::move(served);
      }
      group.balancer = std::make_shared<transport::Balancer>(eps);
      routes_[id] = group.balancer;
      pcas_[id] = std::move(group);
    }
  }

  rpc::Resolver route = [this](const CaId& id) -> std::shared_ptr<transport::Endpoint> {
    auto it = routes_.find(id);
    return it == routes_.end() ? nullptr : it->second;
  };
  for (const auto& d : topology_.domains) {
    auto ra = std::make_shared<RaService>(RaConfig{ra_id(d.name), {operator_keys_.public_key}},
                                          m.keys.at(ra_id(d.name)).private_key, trust_, clock_, route,
                                          state_for(ra_id(d.name)));
    ras_[d.name] = ra;
    auto s = serve(ra_id(d.name), ra);
    routes_[ra_id(d.name)] = s.endpoint;
    served_[ra_id(d.name)] = std::move(s);
  }

  std::map<CaId, std::string> addresses;
  for (const auto& [name, s] : served_)
    if (s.tcp) addresses[name] = "127.0.0.1:" + std::to_string(s.tcp->port());
  auto manifest = make_manifest(make_entries(topology_, m, addresses), directory_id(),
                                m.keys.at(directory_id()).private_key);
  directory_ = std::make_shared<DirectoryService>(manifest, m.keys.at(directory_id()).private_key, trust_, clock_);
  auto s = serve(directory_id(), directory_);
  routes_[directory_id()] = s.endpoint;
  served_[directory_id()] = std::move(s);
}

Deployment::~Deployment() {
  for (auto& [id, g] : pcas_)
    if (g.balancer) g.balancer->stop_health_checks();
  for (auto& [name, s] : served_)
    if (s.tcp) s.tcp->stop();
  served_.clear();
}

std::shared_ptr<StateLog> Deployment::state_for(const std::string& name) const {
  if (options_.state_dir.empty()) return nullptr;
  return std::make_shared<StateLog>((fs::path(options_.state_dir) / (name + ".state")).string());
}

Deployment::Served Deployment::serve(const std::string& name, std::shared_ptr<transport::Handler> handler) {
  Served s;
  s.handler = handler;
  transport::TcpServer::Dispatch dispatch;
  if (options_.server_workers > 0) {
    s.host = std::make_shared<transport::ServiceHost>(handler, options_.server_workers, name);
    s.endpoint = std::make_shared<transport::LocalEndpoint>(s.host);
    dispatch = [host = s.host](ByteView f) { return host->call(f); };
  } else {
    s.endpoint = std::make_shared<transport::DirectEndpoint>(handler);
    dispatch = [handler](ByteView f) { return handler->handle(f); };
  }
  if (options_.tcp) {
    s.tcp = std::make_unique<transport::TcpServer>(transport::HostPort{"127.0.0.1", 0}, dispatch);
    s.endpoint = std::make_shared<transport::TcpEndpoint>(transport::HostPort{"127.0.0.1", s.tcp->port()});
  }
  return s;
}

rpc::Resolver Deployment::resolver() const {
  return [this](const CaId& id) -> std::shared_ptr<transport::Endpoint> {
    auto it = routes_.find(id);
    return it == routes_.end() ? nullptr : it->second;
  };
}

DomainPolicy Deployment::policy_for(const CaId& id) const { return topology_.domain(domain_of(id)).policy; }

std::string Deployment::domain_of(const CaId& id) const {
  auto it = domain_of_.find(id);
  if (it == domain_of_.end()) throw Error(ErrorCode::not_found, "unknown authority " + id);
  return it->second;
}

LtcaService& Deployment::ltca(const std::string& domain) { return *ltcas_.at(domain); }
RaService& Deployment::ra(const std::string& domain) { return *ras_.at(domain); }

PcaGroup& Deployment::pca_group(const CaId& pca) {
  auto it = pcas_.find(pca);
  if (it == pcas_.end()) throw Error(ErrorCode::not_found, "unknown PCA " + pca);
  return it->second;
}

std::vector<CaId> Deployment::pca_ids(const std::string& domain) const {
  std::vector<CaId> out;
  for (std::size_t i = 0; i < topology_.domain(domain).pcas; ++i) out.push_back(pca_id(domain, i));
  return out;
}

std::shared_ptr<transport::ServiceHost> Deployment::host(const CaId& id) const {
  auto it = served_.find(id);
  return it == served_.end() ? nullptr : it->second.host;
}

std::unique_ptr<VehicleClient> Deployment::enroll(const std::string& domain, const std::string& subject_id,
                                                  rpc::Resolver resolver_override) {
  auto kp = crypto::generate_keypair();
  auto ltc = ltca(domain).register_vehicle(make_csr(kp), subject_id, options_.validity);
  VehicleConfig cfg{subject_id, ltca_id(domain), [this](const CaId& id) { return policy_for(id); }};
  return std::make_unique<VehicleClient>(std::move(cfg), std::move(kp), std::move(ltc), trust_, clock_,
                                         resolver_override ? std::move(resolver_override) : resolver());
}

msg::ResolveResponse Deployment::resolve(const std::string& ra_domain, const CaId& pseudonym_issuer,
                                         SerialNumber serial, bool revoke_pseudonyms, bool revoke_ltc) {
  msg::ResolveRequest req{pseudonym_issuer, serial, "operator request", revoke_pseudonyms, revoke_ltc};
  rpc::Client client(routes_.at(ra_id(ra_domain)), trust_, clock_);
  return canonical_decode<msg::ResolveResponse>(client.call(wire::MsgType::resolve_req, canonical_encode(req),
                                                            ra_id(ra_domain), &operator_keys_.private_key));
}

std::vector<LtcaSnapshot> Deployment::ltca_snapshots() const {
  std::vector<LtcaSnapshot> out;
  for (const auto& [d, l] : ltcas_) out.push_back(l->snapshot());
  return out;
}

std::vector<PcaSnapshot> Deployment::pca_snapshots() const {
  std::vector<PcaSnapshot> out;
  for (const auto& [id, g] : pcas_)
    for (const auto& r : g.replicas) out.push_back(r->snapshot());
  return out;
}

void Deployment::write_snapshots(const std::string& dir) const {
  fs::create_directories(dir);
  for (const auto& s : ltca_snapshots()) write_file((fs::path(dir) / (s.ca_id + ".snap")).string(), encode_file(s));
  for (const auto& s : pca_snapshots())
    write_file((fs::path(dir) / (s.ca_id + ".r" + std::to_string(s.replica) + ".snap")).string(), encode_file(s));
}

// --- files for separate processes -------------------------------------------------

std::vector<std::string> write_deployment_files(const Topology& topology, const std::string& dir,
                                                const std::string& host, std::uint16_t base_port) {
  Interval validity{0, TimePoint{1} << 40};
  auto m = make_material(topology, validity);
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, ByteView data) {
    auto path = (fs::path(dir) / name).string();
    write_file(path, data);
    written.push_back(path);
  };

  put("trust.trs", m.trust->encode_file());

  std::map<CaId, std::string> addresses;
  auto port = base_port;
  auto assign = [&](const CaId& id) { addresses[id] = host + ":" + std::to_string(port++); };
  assign(directory_id());
  for (const auto& d : topology.domains) {
    assign(ltca_id(d.name));
    for (std::size_t i = 0; i < d.pcas; ++i) assign(pca_id(d.name, i));
    assign(ra_id(d.name));
  }

  auto key_state = [&](const std::string& file, const CaId& id, const crypto::PrivateKey& key) {
    auto path = (fs::path(dir) / file).string();
    fs::remove(path);
    StateLog log(path);
    append_key_record(log, id, key);
    written.push_back(path);
  };
  key_state("rca.state", rca_id(), m.rca.private_key);
  for (const auto& [id, kp] : m.keys) key_state(id + ".state", id, kp.private_key);

  for (const auto& d : topology.domains) {
    auto text = d.policy.to_json_text();
    put("policy-" + d.name + ".json", to_bytes(text));
  }

  auto manifest = make_manifest(make_entries(topology, m, addresses), directory_id(),
                                m.keys.at(directory_id()).private_key);
  put("directory.manifest", encode_file(manifest));
  put("operator.key", to_bytes(to_hex(m.operator_keys.private_key.export_scalar()) + "\n"));
  put("operators.pub", to_bytes(to_hex(m.operator_keys.public_key.bytes) + "\n"));

  nlohmann::json addr_json = addresses;
  put("addresses.json", to_bytes(addr_json.dump(2)));
  return written;
}

crypto::PrivateKey load_operator_key(const std::string& path) {
  auto bytes = read_file(path);
  std::string text(bytes.begin(), bytes.end());
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  return crypto::PrivateKey::from_scalar(from_hex(text));
}

}  // namespace vpki
