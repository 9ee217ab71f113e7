#include <fstream>

#include "support.hpp"

using namespace vpki;
using testing::kT0;

namespace {

class Echo final : public transport::Handler {
 public:
  Bytes handle(ByteView frame) override { return Bytes(frame.begin(), frame.end()); }
};

std::size_t acquire_with_retry(VehicleClient& v, const CaId& pca, const Interval& iv, std::size_t n, int& retries) {
  v.acquire_ticket(pca, iv);
  try {
    return v.acquire_pseudonyms(pca, iv, n);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::transport_error) throw;
    ++retries;
    return v.acquire_pseudonyms(pca, iv, n);
  }
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("service host kill and restart") {
    auto host = std::make_shared<transport::ServiceHost>(std::make_shared<Echo>(), 2, "echo");
    transport::LocalEndpoint ep(host);
    Bytes msg{1, 2, 3};
    CHECK(ep.exchange(msg) == msg);
    CHECK(ep.probe());
    host->kill();
    CHECK_FALSE(ep.probe());
    CHECK(testing::code_of([&] { ep.exchange(msg); }) == ErrorCode::transport_error);
    host->restart();
    CHECK(ep.exchange(msg) == msg);
    CHECK(host->served() == 2);
  }

  TEST_CASE("host:port parsing") {
    auto hp = transport::HostPort::parse("127.0.0.1:8080");
    CHECK(hp.host == "127.0.0.1");
    CHECK(hp.port == 8080);
    CHECK(hp.str() == "127.0.0.1:8080");
    CHECK(testing::code_of([] { transport::HostPort::parse("nohost"); }) != ErrorCode::ok);
    CHECK(testing::code_of([] { transport::HostPort::parse("h:99999"); }) != ErrorCode::ok);
  }

  TEST_CASE("balancer fails over to the surviving replica") {
    ManualClock clock(kT0);
    DeploymentOptions opt;
    opt.server_workers = 1;
    Deployment d(testing::one_domain({}, 1, 2), clock, opt);
    auto& g = d.pca_group("pca-A-1");
    REQUIRE(g.hosts.size() == 2);
    REQUIRE(g.balancer);
    CHECK(g.balancer->healthy_count() == 2);

    int retries = 0;
    std::vector<std::unique_ptr<VehicleClient>> fleet;
    for (int i = 0; i < 6; ++i) fleet.push_back(d.enroll("A", "veh-" + std::to_string(i)));
    for (auto& v : fleet) CHECK(acquire_with_retry(*v, "pca-A-1", Interval{kT0, kT0 + 600}, 2, retries) == 2);
    CHECK(retries == 0);
    CHECK(g.hosts[0]->served() + g.hosts[1]->served() == 6);

    g.hosts[0]->kill();
    for (auto& v : fleet)
      CHECK(acquire_with_retry(*v, "pca-A-1", Interval{kT0 + 3600, kT0 + 4200}, 2, retries) == 2);
    CHECK(retries <= 1);
    CHECK(g.balancer->healthy_count() == 1);

    g.hosts[0]->restart();
    g.balancer->probe_now();
    CHECK(g.balancer->healthy_count() == 2);
  }

  TEST_CASE("pseudonym lookups follow the replica encoded in the serial") {
    ManualClock clock(kT0);
    Deployment d(testing::one_domain({}, 1, 2), clock);
    std::set<std::uint32_t> seen;
    for (int i = 0; i < 8; ++i) {
      auto v = d.enroll("A", "veh-" + std::to_string(i));
      v->acquire_ticket("pca-A-1", Interval{kT0, kT0 + 300});
      v->acquire_pseudonyms("pca-A-1", Interval{kT0, kT0 + 300}, 1);
      auto serial = v->pool()[0].pseudonym.serial;
      seen.insert(transport::replica_of_serial(serial));
      CHECK(d.resolve("A", "pca-A-1", serial).subject_id == "veh-" + std::to_string(i));
    }
    CHECK(seen.size() == 2);
  }

  TEST_CASE("loopback TCP deployment") {
    ManualClock clock(kT0);
    DeploymentOptions opt;
    opt.tcp = true;
    opt.server_workers = 2;
    Deployment d(testing::two_domains(), clock, opt);
    auto v = d.enroll("A", "veh-1");
    CHECK(v->roam("ltca-B", "pca-B-1", Interval{kT0, kT0 + 900}, 3) == 3);
    auto p = v->pool()[0].pseudonym;
    CHECK(d.resolve("B", p.issuer, p.serial).subject_id == "veh-1");

    transport::TcpEndpoint nowhere(transport::HostPort{"127.0.0.1", 1}, 500);
    CHECK_FALSE(nowhere.probe());
    CHECK(testing::code_of([&] { nowhere.exchange(Bytes{1}); }) == ErrorCode::transport_error);
  }
}

TEST_SUITE("state") {
  TEST_CASE("torn final record is ignored and trimmed") {
    auto dir = testing::temp_dir("state");
    auto path = dir + "/s.log";
    constexpr TypeTag tag{'T', 'E', 'S', 'T'};
    {
      StateLog log(path);
      log.append(tag, Bytes{1});
      log.append(tag, Bytes{2, 2});
      log.append(tag, Bytes{3, 3, 3});
    }
    auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full - 2);

    std::vector<Bytes> seen;
    auto collect = [&](const TypeTag& t, ByteView body) {
      CHECK(t == tag);
      seen.emplace_back(body.begin(), body.end());
    };
    {
      StateLog log(path);
      log.replay(collect);
      CHECK(seen == std::vector<Bytes>{{1}, {2, 2}});
      log.append(tag, Bytes{4});
    }
    seen.clear();
    StateLog(path).replay(collect);
    CHECK(seen == std::vector<Bytes>{{1}, {2, 2}, {4}});
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("key records") {
    auto dir = testing::temp_dir("keys");
    StateLog log(dir + "/k.state");
    auto a = crypto::generate_keypair(), b = crypto::generate_keypair();
    append_key_record(log, "pca-A-1", a.private_key);
    append_key_record(log, "pca-A-2", b.private_key);
    CHECK(load_key_record(log, "pca-A-2").derive_public() == b.public_key);
    CHECK(load_key_record(log, "pca-A-1").derive_public() == a.public_key);
    CHECK(testing::code_of([&] { load_key_record(log, "ltca-A"); }) == ErrorCode::io_error);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("deployment files bootstrap separate processes") {
    auto dir = testing::temp_dir("deploy");
    auto files = write_deployment_files(testing::two_domains(), dir, "127.0.0.1", 47000);
    CHECK(files.size() >= 8);
    auto trust = TrustStore::decode_file(read_file(dir + "/trust.trs"));
    CHECK(trust.ids_with_role(Role::pca).size() == 2);
    StateLog pca_state(dir + "/pca-A-1.state");
    CHECK(load_key_record(pca_state, "pca-A-1").derive_public() == trust.find("pca-A-1")->public_key);
    auto manifest = decode_file<DirectoryManifest>(read_file(dir + "/directory.manifest"));
    CHECK_NOTHROW(verify_manifest(manifest, trust));
    for (const auto& e : manifest.entries)
      if (e.role != Role::rca) CHECK(e.address.rfind("127.0.0.1:", 0) == 0);
    CHECK(DomainPolicy::load(dir + "/policy-A.json") == DomainPolicy{});
    CHECK_NOTHROW(load_operator_key(dir + "/operator.key"));
    std::filesystem::remove_all(dir);
  }
}
