#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vpki/directory.hpp"
#include "vpki/ltca.hpp"
#include "vpki/pca.hpp"
#include "vpki/ra.hpp"
#include "vpki/vehicle.hpp"

namespace vpki {

struct DomainSpec {
  std::string name;
  std::size_t pcas = 1;      // distinct PCA identities
  std::size_t replicas = 1;  // replicas behind each PCA identity
  DomainPolicy policy;
};

struct Topology {
  std::vector<DomainSpec> domains;

  /// Accepts {"domains": [{"name", "pcas", "replicas", "policy": {...}}]}.
  static Topology from_json_text(const std::string& text);
  const DomainSpec& domain(const std::string& name) const;
};

std::string rca_id();
std::string directory_id();
std::string ltca_id(const std::string& domain);
std::string pca_id(const std::string& domain, std::size_t index);
std::string ra_id(const std::string& domain);

struct DeploymentOptions {
  /// 0 runs handlers inline on the caller's thread; otherwise each service
  /// gets a ServiceHost with this many workers.
  std::size_t server_workers = 0;
  /// Serve every authority over loopback TCP instead of in-process calls.
  bool tcp = false;
  /// When set, services persist their tables under this directory.
  std::string state_dir;
  Interval validity{0, TimePoint{1} << 40};
};

struct PcaGroup {
  CaId id;
  std::string domain;
  std::vector<std::shared_ptr<PcaService>> replicas;
  std::vector<std::shared_ptr<transport::ServiceHost>> hosts;  // empty without workers
  std::shared_ptr<transport::Balancer> balancer;
};

/// Every authority of a topology in one process: RCA-certified keys, a trust
/// store, signed directory manifest and the services themselves.
class Deployment {
 public:
  Deployment(Topology topology, const Clock& clock, DeploymentOptions options = {});
  ~Deployment();
  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  const Topology& topology() const { return topology_; }
  const std::shared_ptr<const TrustStore>& trust() const { return trust_; }
  const KeyPair& operator_keys() const { return operator_keys_; }
  const Clock& clock() const { return clock_; }

  /// CaId -> endpoint; PCA identities resolve to their balancer.
  rpc::Resolver resolver() const;
  DomainPolicy policy_for(const CaId& id) const;
  std::string domain_of(const CaId& id) const;

  LtcaService& ltca(const std::string& domain);
  RaService& ra(const std::string& domain);
  PcaGroup& pca_group(const CaId& pca);
  std::vector<CaId> pca_ids(const std::string& domain) const;
  DirectoryService& directory() { return *directory_; }
  std::shared_ptr<transport::ServiceHost> host(const CaId& id) const;

  /// Registers `subject_id` at the domain's LTCA (operator path) and returns
  /// a client wired to this deployment. `resolver` overrides routing, e.g.
  /// to capture traffic.
  std::unique_ptr<VehicleClient> enroll(const std::string& domain, const std::string& subject_id,
                                        rpc::Resolver resolver = nullptr);

  /// Operator-signed resolution through the domain's RA over the wire.
  msg::ResolveResponse resolve(const std::string& ra_domain, const CaId& pseudonym_issuer, SerialNumber serial,
                               bool revoke_pseudonyms = false, bool revoke_ltc = false);

  std::vector<LtcaSnapshot> ltca_snapshots() const;
  std::vector<PcaSnapshot> pca_snapshots() const;
  /// Writes one canonical snapshot file per authority (and replica).
  void write_snapshots(const std::string& dir) const;

 private:
  struct Served {
    std::shared_ptr<transport::Handler> handler;
    std::shared_ptr<transport::ServiceHost> host;
    std::unique_ptr<transport::TcpServer> tcp;
    std::shared_ptr<transport::Endpoint> endpoint;
  };
  Served serve(const std::string& name, std::shared_ptr<transport::Handler> handler);
  std::shared_ptr<StateLog> state_for(const std::string& name) const;

  Topology topology_;
  const Clock& clock_;
  DeploymentOptions options_;
  std::shared_ptr<const TrustStore> trust_;
  KeyPair operator_keys_;
  std::map<CaId, std::string> domain_of_;

  std::map<std::string, std::shared_ptr<LtcaService>> ltcas_;
  std::map<std::string, std::shared_ptr<RaService>> ras_;
  std::map<CaId, PcaGroup> pcas_;
  std::shared_ptr<DirectoryService> directory_;
  std::map<CaId, Served> served_;  // keyed by service instance name
  std::map<CaId, std::shared_ptr<transport::Endpoint>> routes_;
};

/// Files for running the authorities as separate processes: trust store,
/// per-authority state files holding their signing keys, per-domain policy
/// JSON, a signed directory manifest with loopback addresses starting at
/// `base_port`, and the operator key. Returns the files written.
std::vector<std::string> write_deployment_files(const Topology& topology, const std::string& dir,
                                                const std::string& host, std::uint16_t base_port);

/// Operator key files hold the hex scalar.
crypto::PrivateKey load_operator_key(const std::string& path);

}  // namespace vpki
