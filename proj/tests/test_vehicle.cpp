#include <algorithm>

#include "support.hpp"

using namespace vpki;
using testing::kT0;

namespace {

bool contains(const Bytes& hay, ByteView needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}
bool contains(const Bytes& hay, const std::string& needle) {
  return contains(hay, ByteView(reinterpret_cast<const std::uint8_t*>(needle.data()), needle.size()));
}
Bytes be64(TimePoint v) {
  Writer w;
  w.i64(v);
  return w.data();
}

/// Routes through capturing endpoints, one per authority.
struct Tap {
  rpc::Resolver inner;
  std::map<CaId, std::shared_ptr<transport::CapturingEndpoint>> taps;

  rpc::Resolver resolver() {
    return [this](const CaId& id) -> std::shared_ptr<transport::Endpoint> {
      auto& t = taps[id];
      if (!t) {
        auto ep = inner(id);
        if (!ep) return nullptr;
        t = std::make_shared<transport::CapturingEndpoint>(ep);
      }
      return t;
    };
  }
  std::vector<Bytes> sent_to(const CaId& id) const {
    auto it = taps.find(id);
    return it == taps.end() ? std::vector<Bytes>{} : it->second->requests();
  }
};

}  // namespace

TEST_SUITE("vehicle") {
  TEST_CASE("ticket then pseudonyms: grid snap and pooling") {
    ManualClock clock(kT0);
    Deployment d(testing::one_domain(), clock);
    auto v = d.enroll("A", "veh-1");
    const auto& held = v->acquire_ticket("pca-A-1", Interval{kT0 + 100, kT0 + 3500});
    CHECK(held.ticket.interval == Interval{kT0, kT0 + 3600});
    CHECK(held.target == "pca-A-1");
    CHECK(crypto::hash_bind("pca-A-1", held.rnd) == held.ticket.target_digest);

    CHECK(v->acquire_pseudonyms("pca-A-1", Interval{kT0 + 600, kT0 + 1500}, 3) == 3);
    CHECK_FALSE(v->held_ticket());
    REQUIRE(v->pool().size() == 3);
    CHECK(v->pool()[0].pseudonym.interval == Interval{kT0 + 600, kT0 + 900});
    CHECK(v->pool()[2].pseudonym.interval == Interval{kT0 + 1200, kT0 + 1500});

    CHECK(v->current_pseudonym(kT0 + 600) == &v->pool()[0]);
    CHECK(v->current_pseudonym(kT0 + 899) == &v->pool()[0]);
    CHECK(v->current_pseudonym(kT0 + 900) == &v->pool()[1]);
    CHECK(v->current_pseudonym(kT0 + 599) == nullptr);
    CHECK(v->current_pseudonym(kT0 + 1500) == nullptr);

    CHECK(testing::code_of([&] { v->acquire_ticket("pca-A-1", Interval{kT0 + 1800, kT0 + 5400}); }) ==
          ErrorCode::overlapping_ticket);
    CHECK(testing::code_of([&] { v->acquire_pseudonyms("pca-A-1", Interval{kT0, kT0 + 300}, 1); }) ==
          ErrorCode::invalid_argument);

    v->prune(kT0 + 900);
    CHECK(v->pool().size() == 2);
  }

  TEST_CASE("a hundred pseudonyms in one request") {
    ManualClock clock(kT0);
    DomainPolicy p;
    p.ticket_interval_seconds = 6000;
    p.pseudonym_lifetime_seconds = 60;
    Deployment d(testing::one_domain(p), clock);
    auto v = d.enroll("A", "veh-1");
    v->acquire_ticket("pca-A-1", Interval{kT0, kT0 + 6000});
    CHECK(v->acquire_pseudonyms("pca-A-1", Interval{kT0, kT0 + 6000}, 100) == 100);
  }

  TEST_CASE("reused ticket surfaces TicketReused") {
    ManualClock clock(kT0);
    Deployment d(testing::one_domain(), clock);
    auto v = d.enroll("A", "veh-1");
    auto held = v->acquire_ticket("pca-A-1", Interval{kT0, kT0 + 3600});
    v->acquire_pseudonyms("pca-A-1", Interval{kT0, kT0 + 300}, 1);
    auto& pca = *d.pca_group("pca-A-1").replicas[0];
    CHECK(testing::code_of([&] { pca.issue_pseudonyms(held.rnd, Interval{kT0, kT0 + 300}, held.ticket, {make_csr(crypto::generate_keypair())}); }) ==
          ErrorCode::ticket_reused);
  }

  TEST_CASE("concealment: what each authority receives") {
    ManualClock clock(kT0);
    Deployment d(testing::two_domains(), clock);
    Tap tap{d.resolver(), {}};
    auto v = d.enroll("A", "veh-secret", tap.resolver());

    Interval sub{kT0 + 600, kT0 + 1500};
    auto held = v->acquire_ticket("pca-A-1", sub);
    v->acquire_pseudonyms("pca-A-1", sub, 3);
    v->roam("ltca-B", "pca-B-1", Interval{kT0 + 3600 + 300, kT0 + 3600 + 900}, 2);

    auto ltca_traffic = tap.sent_to("ltca-A");
    REQUIRE(ltca_traffic.size() == 2);
    for (const auto& frame : ltca_traffic) {
      CHECK_FALSE(contains(frame, std::string("pca-A-1")));
      CHECK_FALSE(contains(frame, std::string("pca-B-1")));
      CHECK_FALSE(contains(frame, std::string("ltca-B")));
      CHECK_FALSE(contains(frame, be64(sub.start)));
      CHECK_FALSE(contains(frame, be64(sub.end)));
      CHECK_FALSE(contains(frame, be64(kT0 + 3600 + 300)));
      CHECK_FALSE(contains(frame, ByteView(held.rnd.bytes)));
    }

    auto ltc_bytes = canonical_encode(v->ltc());
    for (const auto& pca : {"pca-A-1", "pca-B-1"}) {
      auto frames = tap.sent_to(pca);
      REQUIRE(frames.size() == 1);
      CHECK_FALSE(contains(frames[0], ltc_bytes));
      CHECK_FALSE(contains(frames[0], std::string("veh-secret")));
      CHECK_FALSE(contains(frames[0], ByteView(v->ltc().public_key.bytes)));
    }
    for (const auto& frame : tap.sent_to("ltca-B")) {
      CHECK_FALSE(contains(frame, ltc_bytes));
      CHECK_FALSE(contains(frame, std::string("veh-secret")));
      CHECK_FALSE(contains(frame, std::string("pca-B-1")));
    }
  }

  TEST_CASE("no private key leaves the vehicle") {
    ManualClock clock(kT0);
    Deployment d(testing::one_domain(), clock);
    Tap tap{d.resolver(), {}};
    auto v = d.enroll("A", "veh-1", tap.resolver());
    auto keys = prepare_keys(3);
    std::vector<Bytes> scalars;
    for (const auto& k : keys) scalars.push_back(k.keys.private_key.export_scalar());
    v->acquire_ticket("pca-A-1", Interval{kT0, kT0 + 900});
    CHECK(v->acquire_pseudonyms("pca-A-1", Interval{kT0, kT0 + 900}, std::move(keys)) == 3);
    for (const auto& id : {"ltca-A", "pca-A-1"})
      for (const auto& frame : tap.sent_to(id))
        for (const auto& s : scalars) CHECK_FALSE(contains(frame, s));
  }

  TEST_CASE("roaming stages") {
    ManualClock clock(kT0);
    Deployment d(testing::two_domains(), clock);
    auto v = d.enroll("A", "veh-1");
    CHECK(v->roam("ltca-B", "pca-B-1", Interval{kT0, kT0 + 900}, 3) == 3);
    for (const auto& p : v->pool()) CHECK(p.pseudonym.issuer == "pca-B-1");

    auto w = d.enroll("A", "veh-2");
    w->request_foreign_ticket("ltca-B", Interval{kT0, kT0 + 900});
    CHECK(testing::code_of([&] { w->exchange_foreign_ticket("pca-B-1", Interval{kT0, kT0 + 900}, Rnd256::random()); }) ==
          ErrorCode::ticket_binding_mismatch);
    CHECK(testing::code_of([&] { w->exchange_foreign_ticket("pca-B-1", Interval{kT0, kT0 + 900}); }) ==
          ErrorCode::invalid_argument);
  }

  TEST_CASE("property: pool stays disjoint across interleaved acquisitions") {
    ManualClock clock(kT0);
    DomainPolicy p;
    p.ticket_interval_seconds = 600;
    p.pseudonym_lifetime_seconds = 60;
    Deployment d(testing::two_domains(p), clock);
    auto v = d.enroll("A", "veh-1");
    std::mt19937_64 rng(4);
    TimePoint t = kT0;
    for (int i = 0; i < 12; ++i) {
      Interval iv{t + static_cast<TimePoint>(rng() % 200), t + 300 + static_cast<TimePoint>(rng() % 300)};
      if (rng() % 2) {
        v->roam("ltca-B", "pca-B-1", iv, 1 + rng() % 6);
      } else {
        v->acquire_ticket("pca-A-1", iv);
        v->acquire_pseudonyms("pca-A-1", iv, 1 + rng() % 6);
      }
      t += 600;
    }
    const auto& pool = v->pool();
    CHECK(pool.size() > 12);
    for (std::size_t i = 0; i < pool.size(); ++i)
      for (std::size_t j = i + 1; j < pool.size(); ++j)
        CHECK_FALSE(pool[i].pseudonym.interval.overlaps(pool[j].pseudonym.interval));
  }

  TEST_CASE("CRL and OCSP consumption") {
    ManualClock clock(kT0);
    Deployment d(testing::one_domain(), clock);
    auto v = d.enroll("A", "veh-1");
    auto bad = d.enroll("A", "veh-2");
    v->acquire_ticket("pca-A-1", Interval{kT0, kT0 + 3600});
    v->acquire_pseudonyms("pca-A-1", Interval{kT0, kT0 + 900}, 3);
    bad->acquire_ticket("pca-A-1", Interval{kT0, kT0 + 3600});
    bad->acquire_pseudonyms("pca-A-1", Interval{kT0, kT0 + 3000}, 10);

    CHECK(v->refresh_crl("pca-A-1") == 0);
    CHECK(v->crl_sequence("pca-A-1") == 0u);

    clock.set(kT0 + 1200);
    auto revoked = bad->pool()[7].pseudonym.serial;
    auto r = d.resolve("A", "pca-A-1", revoked, true);
    CHECK(r.revoked_pseudonyms == 6);
    CHECK(v->refresh_crl("pca-A-1") == 6);
    CHECK(v->crl_sequence("pca-A-1") == 1u);
    CHECK(v->crl_cache("pca-A-1")->contains(revoked));
    CHECK(v->refresh_crl("pca-A-1") == 6);

    clock.set(kT0 + 600);
    CHECK(v->check_status("pca-A-1", revoked, clock.now()) == msg::OcspStatus::revoked);
    CHECK(v->check_status("pca-A-1", v->pool()[0].pseudonym.serial, clock.now()) == msg::OcspStatus::good);
    CHECK(testing::code_of([&] { v->check_status_as(v->pool()[0], "pca-A-1", revoked); }) ==
          ErrorCode::unauthorized);
    clock.set(kT0 + 900);
    CHECK(testing::code_of([&] { v->check_status("pca-A-1", revoked, clock.now()); }) == ErrorCode::unauthorized);
  }

  TEST_CASE("LTC update over the wire") {
    ManualClock clock(kT0);
    Deployment d(testing::one_domain(), clock);
    auto v = d.enroll("A", "veh-1");
    auto old = v->ltc();
    v->update_ltc();
    CHECK(v->ltc().serial != old.serial);
    CHECK(v->ltc().subject_id == "veh-1");
    CHECK(v->acquire_ticket("pca-A-1", Interval{kT0, kT0 + 300}).ticket.issuer == "ltca-A");
  }

  TEST_CASE("operator registration over the wire") {
    ManualClock clock(kT0);
    Deployment d(testing::one_domain(), clock);
    rpc::Client client(d.resolver()("ltca-A"), d.trust(), clock);
    auto kp = crypto::generate_keypair();
    auto ltc = register_remote(client, "ltca-A", d.operator_keys().private_key, "veh-9", kp, Interval{0, kT0 * 2});
    CHECK(ltc.subject_id == "veh-9");
    auto stranger = crypto::generate_keypair();
    CHECK(testing::code_of([&] {
            register_remote(client, "ltca-A", stranger.private_key, "veh-10", kp, Interval{0, kT0 * 2});
          }) == ErrorCode::unauthorized);
  }
}
