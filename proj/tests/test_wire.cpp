#include "support.hpp"
#include "vpki/directory.hpp"
#include "vpki/wire.hpp"

using namespace vpki;

namespace {

/// Rewrites response frames on the way back.
class TamperingEndpoint final : public transport::Endpoint {
 public:
  TamperingEndpoint(std::shared_ptr<transport::Endpoint> inner, std::function<void(wire::Envelope&)> edit)
      : inner_(std::move(inner)), edit_(std::move(edit)) {}
  Bytes exchange(ByteView frame) override {
    auto env = wire::deframe(inner_->exchange(frame));
    edit_(env);
    return wire::frame(env);
  }

 private:
  std::shared_ptr<transport::Endpoint> inner_;
  std::function<void(wire::Envelope&)> edit_;
};

Bytes lookup_body(const CaId& id) {
  msg::DirectoryRequest req;
  req.kind = msg::DirectoryRequest::Kind::lookup;
  req.ca_id = id;
  return canonical_encode(req);
}

}  // namespace

TEST_SUITE("wire") {
  TEST_CASE("empty payload frames to exactly the header") {
    wire::Envelope env{0x0010, 1, 2, {}};
    auto f = wire::frame(env);
    CHECK(f.size() == 27);
    CHECK(wire::kHeaderBytes == 27);
    CHECK(wire::deframe(f) == env);
  }

  TEST_CASE("deframe rejects bad magic, version and length") {
    auto f = wire::frame(wire::Envelope{0x0001, 7, 8, Bytes{1, 2, 3}});
    auto bad_magic = f;
    bad_magic[0] = 'X';
    CHECK(testing::code_of([&] { wire::deframe(bad_magic); }) == ErrorCode::frame_error);
    auto bad_version = f;
    bad_version[4] = 2;
    CHECK(testing::code_of([&] { wire::deframe(bad_version); }) == ErrorCode::frame_error);
    auto longer = f;
    longer.push_back(0);
    CHECK(testing::code_of([&] { wire::deframe(longer); }) == ErrorCode::frame_error);
    Bytes shorter(f.begin(), f.end() - 1);
    CHECK(testing::code_of([&] { wire::deframe(shorter); }) == ErrorCode::frame_error);
    auto huge = f;
    huge[23] = 0x7f;  // length field high byte
    CHECK(testing::code_of([&] { wire::payload_length_from_header(huge); }) == ErrorCode::frame_error);
  }

  TEST_CASE("freshness window and replay cache") {
    wire::NonceCache seen;
    TimePoint now = 10000;
    CHECK(wire::check_freshness(wire::Envelope{1, 1, now - 301, {}}, now, seen) == wire::Freshness::stale_timestamp);
    CHECK(wire::check_freshness(wire::Envelope{1, 2, now + 301, {}}, now, seen) == wire::Freshness::stale_timestamp);
    CHECK(wire::check_freshness(wire::Envelope{1, 3, now - 300, {}}, now, seen) == wire::Freshness::accept);
    CHECK(wire::check_freshness(wire::Envelope{1, 3, now, {}}, now, seen) == wire::Freshness::replayed_nonce);
    // A stale request does not consume its nonce.
    CHECK(wire::check_freshness(wire::Envelope{1, 1, now, {}}, now, seen) == wire::Freshness::accept);
  }

  TEST_CASE("nonce cache forgets entries after its retention") {
    wire::NonceCache seen(600);
    CHECK(seen.check_and_insert(5, 0));
    CHECK_FALSE(seen.check_and_insert(5, 600));
    CHECK(seen.check_and_insert(5, 1201));
  }

  TEST_CASE("response nonce is N+1 modulo 2^64") {
    wire::Envelope req{0x0001, 41, 0, {}};
    CHECK(wire::respond(req, wire::MsgType::ticket_res, {}, 0).nonce == 42);
    req.nonce = ~std::uint64_t{0};
    CHECK(wire::respond(req, wire::MsgType::ticket_res, {}, 0).nonce == 0);
  }

  TEST_CASE("message registry") {
    CHECK(wire::response_type(wire::MsgType::ticket_req) == wire::MsgType::ticket_res);
    CHECK(wire::response_type(wire::MsgType::ntkt_req) == wire::MsgType::ntkt_res);
    CHECK(wire::response_type(wire::MsgType::resolve_req) == wire::MsgType::resolve_res);
    CHECK(wire::response_type(wire::MsgType::err) == wire::MsgType::err);
    CHECK(wire::required_auth(wire::MsgType::ticket_req) == wire::ChannelAuthMode::mutual);
    CHECK(wire::required_auth(wire::MsgType::ftkt_req) == wire::ChannelAuthMode::mutual);
    CHECK(wire::required_auth(wire::MsgType::psnym_req) == wire::ChannelAuthMode::server_only);
    CHECK(wire::required_auth(wire::MsgType::crl_req) == wire::ChannelAuthMode::server_only);
  }

  TEST_CASE("rpc: replayed envelope is refused, stale clock is refused") {
    ManualClock clock(testing::kT0);
    Deployment d(testing::one_domain(), clock);
    rpc::Client client(d.resolver()(directory_id()), d.trust(), clock);
    auto env = rpc::make_request(wire::MsgType::dir_req, lookup_body("pca-A-1"), clock.now());
    CHECK_NOTHROW(client.call_envelope(env, directory_id()));
    CHECK(testing::code_of([&] { client.call_envelope(env, directory_id()); }) == ErrorCode::replayed_nonce);

    auto old = rpc::make_request(wire::MsgType::dir_req, lookup_body("pca-A-1"), clock.now() - 301);
    CHECK(testing::code_of([&] { client.call_envelope(old, directory_id()); }) == ErrorCode::stale_timestamp);
  }

  TEST_CASE("rpc: client rejects wrong nonce, wrong responder and forged signature") {
    ManualClock clock(testing::kT0);
    Deployment d(testing::one_domain(), clock);
    auto real = d.resolver()(directory_id());

    rpc::Client ok(real, d.trust(), clock);
    CHECK_NOTHROW(ok.call(wire::MsgType::dir_req, lookup_body("ltca-A"), directory_id()));
    CHECK(testing::code_of([&] { ok.call(wire::MsgType::dir_req, lookup_body("ltca-A"), "ltca-A"); }) ==
          ErrorCode::response_invalid);

    rpc::Client nonce(std::make_shared<TamperingEndpoint>(real, [](wire::Envelope& e) { e.nonce += 1; }), d.trust(),
                      clock);
    CHECK(testing::code_of([&] { nonce.call(wire::MsgType::dir_req, lookup_body("ltca-A"), directory_id()); }) ==
          ErrorCode::response_invalid);

    rpc::Client flipped(std::make_shared<TamperingEndpoint>(real, [](wire::Envelope& e) { e.payload.back() ^= 1; }),
                        d.trust(), clock);
    CHECK(testing::code_of([&] { flipped.call(wire::MsgType::dir_req, lookup_body("ltca-A"), directory_id()); }) ==
          ErrorCode::response_invalid);

    rpc::Client retyped(std::make_shared<TamperingEndpoint>(
                            real, [](wire::Envelope& e) { e.msg_type = static_cast<std::uint16_t>(wire::MsgType::crl_res); }),
                        d.trust(), clock);
    CHECK(testing::code_of([&] { retyped.call(wire::MsgType::dir_req, lookup_body("ltca-A"), directory_id()); }) ==
          ErrorCode::response_invalid);
  }

  TEST_CASE("rpc: server errors arrive as signed error envelopes") {
    ManualClock clock(testing::kT0);
    Deployment d(testing::one_domain(), clock);
    rpc::Client client(d.resolver()(directory_id()), d.trust(), clock);
    CHECK(testing::code_of([&] { client.call(wire::MsgType::dir_req, lookup_body("nobody"), directory_id()); }) ==
          ErrorCode::not_found);
    CHECK(testing::code_of([&] { client.call(wire::MsgType::crl_req, Bytes{}, directory_id()); }) ==
          ErrorCode::unsupported_message);
    CHECK(testing::code_of([&] { client.call(wire::MsgType::dir_req, Bytes{1, 2}, directory_id()); }) ==
          ErrorCode::decode_error);
  }
}

TEST_SUITE("policy") {
  TEST_CASE("ticket grid snap is outward") {
    CHECK(snap_outward(Interval{100, 3500}, 3600) == Interval{0, 3600});
    CHECK(snap_outward(Interval{0, 3600}, 3600) == Interval{0, 3600});
    CHECK(snap_outward(Interval{1800, 5400}, 3600) == Interval{0, 7200});
    CHECK(snap_outward(Interval{-10, 5}, 3600) == Interval{-3600, 3600});
    CHECK(snap_outward(Interval{150, 250}, 100, 50) == Interval{150, 250});
    CHECK(snap_outward(Interval{151, 249}, 100, 50) == Interval{150, 250});
  }

  TEST_CASE("align_lifetimes examples") {
    CHECK(align_lifetimes(Interval{600, 1500}, 300) ==
          std::vector<Interval>{{600, 900}, {900, 1200}, {1200, 1500}});
    CHECK(align_lifetimes(Interval{0, 300}, 300) == std::vector<Interval>{{0, 300}});
    CHECK(align_lifetimes(Interval{450, 1500}, 300) ==
          std::vector<Interval>{{300, 600}, {600, 900}, {900, 1200}, {1200, 1500}});
    CHECK(testing::code_of([] { align_lifetimes(Interval{5, 5}, 300); }) == ErrorCode::empty_request);
    CHECK(testing::code_of([] { align_lifetimes(Interval{-5, 5}, 300); }) == ErrorCode::invalid_argument);
  }

  TEST_CASE("property: align_lifetimes equals slot enumeration") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
      TimePoint tau = 1 + static_cast<TimePoint>(rng() % 50);
      TimePoint epoch = static_cast<TimePoint>(rng() % 100);
      TimePoint s = epoch + static_cast<TimePoint>(rng() % 500);
      TimePoint e = s + 1 + static_cast<TimePoint>(rng() % 500);
      // Oracle: every slot [epoch + k*tau, epoch + (k+1)*tau) intersecting [s, e).
      std::vector<Interval> expect;
      for (TimePoint k = 0; epoch + k * tau < e; ++k) {
        Interval slot{epoch + k * tau, epoch + (k + 1) * tau};
        if (slot.overlaps(Interval{s, e})) expect.push_back(slot);
      }
      auto got = align_lifetimes(Interval{s, e}, tau, epoch);
      REQUIRE(got == expect);
      for (std::size_t k = 1; k < got.size(); ++k) CHECK(got[k - 1].end == got[k].start);
    }
  }

  TEST_CASE("policy validation and JSON") {
    DomainPolicy p;
    CHECK_NOTHROW(p.validate());
    p.pseudonym_lifetime_seconds = 700;
    CHECK(testing::code_of([&] { p.validate(); }) == ErrorCode::invalid_argument);
    p.pseudonym_lifetime_seconds = 0;
    CHECK(testing::code_of([&] { p.validate(); }) == ErrorCode::invalid_argument);

    auto q = DomainPolicy::from_json_text(R"({"ticket_interval_seconds": 600, "pseudonym_lifetime_seconds": 6})");
    CHECK(q.ticket_interval_seconds == 600);
    CHECK(q.pseudonym_lifetime_seconds == 6);
    CHECK(q.pop_failure_threshold == 3);
    CHECK(DomainPolicy::from_json_text(q.to_json_text()) == q);
    CHECK(testing::code_of([] { DomainPolicy::from_json_text(R"({"ticket_interval_seconds": 601, "pseudonym_lifetime_seconds": 6})"); }) ==
          ErrorCode::invalid_argument);
    CHECK(testing::code_of([] { DomainPolicy::from_json_text("{"); }) == ErrorCode::invalid_argument);
  }
}
