#include <algorithm>
#include <thread>

#include "support.hpp"

using namespace vpki;

namespace {

constexpr Interval kForever{0, TimePoint{1} << 40};

struct LtcaFixture {
  ManualClock clock{50};
  Deployment d{testing::two_domains(), clock};
  LtcaService& a = d.ltca("A");
  LtcaService& b = d.ltca("B");

  std::pair<KeyPair, LongTermCertificate> enroll(LtcaService& ltca, const std::string& id) {
    auto kp = crypto::generate_keypair();
    auto ltc = ltca.register_vehicle(make_csr(kp), id, kForever);
    return {kp, ltc};
  }
};

Digest256 digest_for(const CaId& target) { return crypto::hash_bind(target, Rnd256::random()); }

bool contains_bytes(const Bytes& hay, const std::string& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

TEST_SUITE("ltca") {
  TEST_CASE("register_vehicle") {
    LtcaFixture f;
    auto kp = crypto::generate_keypair();
    auto ltc = f.a.register_vehicle(make_csr(kp), "veh-1", kForever);
    CHECK(ltc.issuer == "ltca-A");
    CHECK(ltc.subject_id == "veh-1");
    CHECK(ltc.public_key == kp.public_key);
    CHECK(validate_chain(ltc, *f.d.trust(), 100) == ValidationResult::valid);
    CHECK(testing::code_of([&] { f.a.register_vehicle(make_csr(crypto::generate_keypair()), "veh-1", kForever); }) ==
          ErrorCode::duplicate_subject);
    auto broken = make_csr(crypto::generate_keypair());
    broken.pop_signature.bytes[3] ^= 1;
    CHECK(testing::code_of([&] { f.a.register_vehicle(broken, "veh-2", kForever); }) ==
          ErrorCode::bad_proof_of_possession);
  }

  TEST_CASE("update_ltc retires the old certificate") {
    LtcaFixture f;
    auto [kp, old] = f.enroll(f.a, "veh-1");
    auto fresh_keys = crypto::generate_keypair();
    auto fresh = f.a.update_ltc(old, make_csr(fresh_keys));
    CHECK(fresh.serial != old.serial);
    CHECK(fresh.public_key == fresh_keys.public_key);
    CHECK(testing::code_of([&] { f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 200}, old); }) ==
          ErrorCode::revoked_credential);
    CHECK_NOTHROW(f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 200}, fresh));
    auto snap = f.a.snapshot();
    REQUIRE(snap.vehicles.size() == 1);
    CHECK(snap.vehicles[0].ltc_serials == std::vector<SerialNumber>{old.serial, fresh.serial});

    f.a.revoke_ltc("veh-1");
    CHECK(testing::code_of([&] { f.a.update_ltc(fresh, make_csr(crypto::generate_keypair())); }) ==
          ErrorCode::revoked_credential);

    LongTermCertificate ghost{999, "ghost", fresh_keys.public_key, kForever, "ltca-A", {}};
    sign_in_place(ghost, f.a.signing_key());
    CHECK(testing::code_of([&] { f.a.update_ltc(ghost, make_csr(crypto::generate_keypair())); }) ==
          ErrorCode::unknown_subject);
  }

  TEST_CASE("issue_ticket snaps outward and excludes overlapping requests") {
    LtcaFixture f;
    auto [kp, ltc] = f.enroll(f.a, "veh-1");
    auto d = digest_for("pca-A-1");
    auto t = f.a.issue_ticket(d, Interval{100, 3500}, ltc);
    CHECK(t.interval == Interval{0, 3600});
    CHECK(t.tkt_expiry == 3600);
    CHECK(t.target_digest == d);
    CHECK(t.issuer == "ltca-A");
    CHECK(validate_chain(t, *f.d.trust(), 100) == ValidationResult::valid);

    CHECK(testing::code_of([&] { f.a.issue_ticket(digest_for("pca-A-1"), Interval{1800, 5400}, ltc); }) ==
          ErrorCode::overlapping_ticket);
    CHECK(testing::code_of([&] { f.a.issue_ticket(digest_for("ltca-B"), Interval{0, 10}, ltc); }) ==
          ErrorCode::overlapping_ticket);
    CHECK_NOTHROW(f.a.issue_ticket(digest_for("pca-A-1"), Interval{3600, 7200}, ltc));

    auto [kp2, other] = f.enroll(f.a, "veh-2");
    CHECK_NOTHROW(f.a.issue_ticket(d, Interval{100, 3500}, other));

    // Once the first ticket has expired it no longer blocks its interval.
    f.clock.set(3600);
    auto [kp3, third] = f.enroll(f.a, "veh-3");
    CHECK_NOTHROW(f.a.issue_ticket(d, Interval{0, 3600}, third));
    CHECK(testing::code_of([&] { f.a.issue_ticket(d, Interval{3600, 3700}, third); }) == ErrorCode::ok);
  }

  TEST_CASE("issue_ticket refuses foreign, revoked and forged LTCs") {
    LtcaFixture f;
    auto [kp, ltc_b] = f.enroll(f.b, "veh-b");
    CHECK(testing::code_of([&] { f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 200}, ltc_b); }) ==
          ErrorCode::unknown_issuer);
    auto [kp2, ltc] = f.enroll(f.a, "veh-1");
    auto forged = ltc;
    forged.validity.end += 1;
    CHECK(testing::code_of([&] { f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 200}, forged); }) ==
          ErrorCode::bad_signature);
    f.a.revoke_ltc("veh-1");
    CHECK(testing::code_of([&] { f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 200}, ltc); }) ==
          ErrorCode::revoked_credential);
  }

  TEST_CASE("property: every ticket interval lies on the grid") {
    ManualClock clock(0);
    DomainPolicy p;
    p.ticket_interval_seconds = 600;
    p.pseudonym_lifetime_seconds = 60;
    p.grid_epoch = 17;
    Deployment d(testing::one_domain(p), clock);
    auto& ltca = d.ltca("A");
    std::mt19937_64 rng(21);
    for (int i = 0; i < 200; ++i) {
      auto kp = crypto::generate_keypair();
      auto ltc = ltca.register_vehicle(make_csr(kp), "veh-" + std::to_string(i), kForever);
      TimePoint s = static_cast<TimePoint>(rng() % 10000);
      Interval req{s, s + 1 + static_cast<TimePoint>(rng() % 2000)};
      auto t = ltca.issue_ticket(digest_for("pca-A-1"), req, ltc);
      CHECK((t.interval.start - 17) % 600 == 0);
      CHECK((t.interval.end - 17) % 600 == 0);
      CHECK(req.within(t.interval));
      CHECK(t.interval.start > req.start - 600);
      CHECK(t.interval.end < req.end + 600);
    }
  }

  TEST_CASE("concurrent overlapping requests for one subject yield one ticket") {
    LtcaFixture f;
    auto [kp, ltc] = f.enroll(f.a, "veh-1");
    std::atomic<int> ok{0}, overlap{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
      threads.emplace_back([&, i] {
        for (int k = 0; k < 10; ++k) {
          auto code = testing::code_of(
              [&] { f.a.issue_ticket(digest_for("pca-A-1"), Interval{100 + i * 10 + k, 3000}, ltc); });
          if (code == ErrorCode::ok) ++ok;
          if (code == ErrorCode::overlapping_ticket) ++overlap;
        }
      });
    for (auto& t : threads) t.join();
    CHECK(ok == 1);
    CHECK(overlap == 79);
  }

  TEST_CASE("exchange_foreign_ticket") {
    LtcaFixture f;
    auto [kp, ltc] = f.enroll(f.a, "veh-1");
    auto rnd = Rnd256::random();
    auto f_tkt = f.a.issue_ticket(crypto::hash_bind("ltca-B", rnd), Interval{100, 3500}, ltc);

    CHECK(testing::code_of([&] {
            f.b.exchange_foreign_ticket(f_tkt, Rnd256::random(), digest_for("pca-B-1"), Interval{0, 3600});
          }) == ErrorCode::ticket_binding_mismatch);
    CHECK(testing::code_of([&] {
            f.b.exchange_foreign_ticket(f_tkt, rnd, digest_for("pca-B-1"), Interval{0, 4000});
          }) == ErrorCode::interval_violation);

    auto digest_pca = digest_for("pca-B-1");
    auto n_tkt = f.b.exchange_foreign_ticket(f_tkt, rnd, digest_pca, Interval{0, 3600});
    CHECK(n_tkt.issuer == "ltca-B");
    CHECK(n_tkt.target_digest == digest_pca);
    CHECK(n_tkt.interval.within(f_tkt.interval));
    auto snap = f.b.snapshot();
    REQUIRE(snap.exchanges.size() == 1);
    CHECK(snap.exchanges[0].foreign_issuer == "ltca-A");
    CHECK(snap.exchanges[0].foreign_serial == f_tkt.serial);

    CHECK(testing::code_of([&] {
            f.b.exchange_foreign_ticket(f_tkt, rnd, digest_for("pca-B-1"), Interval{0, 3600});
          }) == ErrorCode::ticket_reused);

    // Ticket from an issuer outside the trust store.
    auto rogue = f_tkt;
    rogue.issuer = "ltca-Z";
    sign_in_place(rogue, crypto::generate_keypair().private_key);
    CHECK(testing::code_of([&] {
            f.b.exchange_foreign_ticket(rogue, rnd, digest_for("pca-B-1"), Interval{0, 3600});
          }) == ErrorCode::unknown_issuer);
  }

  TEST_CASE("resolve_ticket and revoke_ltc") {
    LtcaFixture f;
    auto [kp, ltc] = f.enroll(f.a, "veh-1");
    auto t = f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 200}, ltc);
    auto r = f.a.resolve_ticket(t.serial, false);
    CHECK_FALSE(r.is_foreign);
    CHECK(r.subject_id == "veh-1");

    auto rnd = Rnd256::random();
    auto [kp2, ltc2] = f.enroll(f.a, "veh-2");
    auto f_tkt = f.a.issue_ticket(crypto::hash_bind("ltca-B", rnd), Interval{100, 200}, ltc2);
    auto n_tkt = f.b.exchange_foreign_ticket(f_tkt, rnd, digest_for("pca-B-1"), Interval{0, 3600});
    auto p = f.b.resolve_ticket(n_tkt.serial, false);
    CHECK(p.is_foreign);
    CHECK(p.home_ltca == "ltca-A");
    CHECK(p.foreign_ticket_serial == f_tkt.serial);
    CHECK(f.a.resolve_ticket(p.foreign_ticket_serial, false).subject_id == "veh-2");

    CHECK(testing::code_of([&] { f.a.resolve_ticket(987654, false); }) == ErrorCode::unknown_ticket);

    CHECK_NOTHROW(f.a.revoke_ltc("veh-1"));
    CHECK_NOTHROW(f.a.revoke_ltc("veh-1"));
    CHECK(testing::code_of([&] { f.a.revoke_ltc("nobody"); }) == ErrorCode::unknown_subject);
    CHECK(testing::code_of([&] { f.a.issue_ticket(digest_for("pca-A-1"), Interval{5000, 6000}, ltc); }) ==
          ErrorCode::revoked_credential);
  }

  TEST_CASE("resolution over the wire requires an RA signature") {
    LtcaFixture f;
    auto [kp, ltc] = f.enroll(f.a, "veh-1");
    auto t = f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 200}, ltc);
    rpc::Client client(f.d.resolver()("ltca-A"), f.d.trust(), f.clock);
    auto body = canonical_encode(msg::ResolveTicketRequest{"ra-A", t.serial, false});
    auto impostor = crypto::generate_keypair();
    CHECK(testing::code_of([&] { client.call(wire::MsgType::resolve_ticket_req, body, "ltca-A", &impostor.private_key); }) ==
          ErrorCode::unauthorized);
    auto as_vehicle = canonical_encode(msg::ResolveTicketRequest{"veh-1", t.serial, false});
    CHECK(testing::code_of([&] { client.call(wire::MsgType::resolve_ticket_req, as_vehicle, "ltca-A", &kp.private_key); }) ==
          ErrorCode::unauthorized);
    auto res = canonical_decode<msg::ResolveTicketResponse>(
        client.call(wire::MsgType::resolve_ticket_req, body, "ltca-A", &f.d.ra("A").signing_key()));
    CHECK(res.subject_id == "veh-1");
  }

  TEST_CASE("ticket requests must be signed by the LTC key") {
    LtcaFixture f;
    auto [kp, ltc] = f.enroll(f.a, "veh-1");
    rpc::Client client(f.d.resolver()("ltca-A"), f.d.trust(), f.clock);
    auto body = canonical_encode(msg::TicketRequest{digest_for("pca-A-1"), Interval{100, 200}, ltc});
    auto thief = crypto::generate_keypair();
    CHECK(testing::code_of([&] { client.call(wire::MsgType::ticket_req, body, "ltca-A", &thief.private_key); }) ==
          ErrorCode::bad_signature);
    CHECK_NOTHROW(client.call(wire::MsgType::ticket_req, body, "ltca-A", &kp.private_key));
  }

  TEST_CASE("knowledge bound and native/foreign transparency") {
    LtcaFixture f;
    auto [kp1, ltc1] = f.enroll(f.a, "veh-1");
    auto [kp2, ltc2] = f.enroll(f.a, "veh-2");
    auto native = f.a.issue_ticket(digest_for("pca-A-1"), Interval{100, 3500}, ltc1);
    auto foreign = f.a.issue_ticket(digest_for("ltca-B"), Interval{100, 3500}, ltc2);
    auto snap = f.a.snapshot();
    REQUIRE(snap.tickets.size() == 2);
    auto bytes = encode_file(snap);
    CHECK_FALSE(contains_bytes(bytes, "pca-A-1"));
    CHECK_FALSE(contains_bytes(bytes, "ltca-B"));

    // Rows differ only in serial, subject and digest.
    auto r1 = snap.tickets[0], r2 = snap.tickets[1];
    CHECK(canonical_encode(r1).size() == canonical_encode(r2).size());
    CHECK(r1.interval == r2.interval);
    CHECK(r1.issued_at == r2.issued_at);
    CHECK(native.interval == foreign.interval);
  }

  TEST_CASE("persistent state survives a restart") {
    auto dir = testing::temp_dir("ltca");
    ManualClock clock(50);
    Deployment d(testing::one_domain(), clock);
    auto& live = d.ltca("A");
    auto state = std::make_shared<StateLog>(dir + "/ltca.state");
    Digest256 digest = digest_for("pca-A-1");
    LongTermCertificate ltc, updated;
    Ticket ticket;
    {
      LtcaService first(live.config(), live.signing_key(), d.trust(), clock, state);
      auto kp = crypto::generate_keypair();
      ltc = first.register_vehicle(make_csr(kp), "veh-1", kForever);
      updated = first.update_ltc(ltc, make_csr(crypto::generate_keypair()));
      ticket = first.issue_ticket(digest, Interval{100, 3500}, updated);
      first.register_vehicle(make_csr(crypto::generate_keypair()), "veh-2", kForever);
      first.revoke_ltc("veh-2");
    }
    state.reset();
    LtcaService second(live.config(), live.signing_key(), d.trust(), clock,
                       std::make_shared<StateLog>(dir + "/ltca.state"));
    CHECK(testing::code_of([&] { second.register_vehicle(make_csr(crypto::generate_keypair()), "veh-1", kForever); }) ==
          ErrorCode::duplicate_subject);
    CHECK(testing::code_of([&] { second.issue_ticket(digest, Interval{0, 10}, updated); }) ==
          ErrorCode::overlapping_ticket);
    CHECK(testing::code_of([&] { second.issue_ticket(digest, Interval{4000, 5000}, ltc); }) ==
          ErrorCode::revoked_credential);
    CHECK(second.resolve_ticket(ticket.serial, false).subject_id == "veh-1");
    auto next = second.issue_ticket(digest, Interval{4000, 5000}, updated);
    CHECK(next.serial > ticket.serial);
    auto snap = second.snapshot();
    CHECK(snap.vehicles.size() == 2);
    CHECK(snap.vehicles[1].revoked);
    std::filesystem::remove_all(dir);
  }
}
