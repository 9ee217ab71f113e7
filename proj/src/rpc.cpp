#include "vpki/rpc.hpp"

#include "vpki/errors.hpp"

namespace vpki::rpc {

wire::Envelope make_request(wire::MsgType type, ByteView body, TimePoint now, const crypto::PrivateKey* signer) {
  wire::Envelope env;
  env.msg_type = static_cast<std::uint16_t>(type);
  env.nonce = crypto::random_u64();
  env.timestamp = now;
  if (signer != nullptr) {
    msg::SignedRequest req;
    req.body.assign(body.begin(), body.end());
    req.signature = crypto::sign(*signer, msg::request_binding(env.msg_type, env.nonce, env.timestamp, body));
    env.payload = canonical_encode(req);
  } else {
    env.payload.assign(body.begin(), body.end());
  }
  return env;
}

bool verify_request(const wire::Envelope& env, const msg::SignedRequest& req, const PublicKey& key) {
  return crypto::verify(key, msg::request_binding(env.msg_type, env.nonce, env.timestamp, req.body),
                        req.signature);
}

Bytes Client::call(wire::MsgType type, ByteView body, const CaId& expected_responder,
                   const crypto::PrivateKey* signer) const {
  return call_envelope(make_request(type, body, clock_.now(), signer), expected_responder);
}

Bytes Client::call_envelope(const wire::Envelope& request, const CaId& expected_responder) const {
  auto raw = endpoint_->exchange(wire::frame(request));

  wire::Envelope env;
  msg::SignedResponse res;
  try {
    env = wire::deframe(raw);
    res = canonical_decode<msg::SignedResponse>(env.payload);
  } catch (const Error& e) {
    throw Error(ErrorCode::response_invalid, std::string("malformed response: ") + e.what());
  }
  if (env.nonce != request.nonce + 1) throw Error(ErrorCode::response_invalid, "nonce is not N+1");
  auto expected_type = wire::response_type(request.type());
  if (env.type() != expected_type && env.type() != wire::MsgType::err)
    throw Error(ErrorCode::response_invalid, "unexpected response type");
  if (res.responder != expected_responder)
    throw Error(ErrorCode::response_invalid, "response from " + res.responder + ", expected " + expected_responder);
  const auto* entry = trust_->find(res.responder);
  if (entry == nullptr) throw Error(ErrorCode::response_invalid, "responder not in trust store");
  if (!crypto::verify(entry->public_key,
                      msg::response_binding(env.msg_type, env.nonce, env.timestamp, res.responder, res.body),
                      res.signature))
    throw Error(ErrorCode::response_invalid, "bad responder signature");

  if (env.type() == wire::MsgType::err) {
    msg::ErrorBody err;
    try {
      err = canonical_decode<msg::ErrorBody>(res.body);
    } catch (const Error&) {
      throw Error(ErrorCode::response_invalid, "malformed error body");
    }
    throw Error(err.code, err.detail);
  }
  return std::move(res.body);
}

Server::Server(CaId id, crypto::PrivateKey key, const Clock& clock, TimePoint skew_seconds)
    : id_(std::move(id)), key_(std::move(key)), clock_(clock), skew_(skew_seconds), nonces_(2 * skew_seconds) {
  check_ca_id(id_);
}

msg::SignedRequest Server::open_signed(const wire::Envelope& env) {
  return canonical_decode<msg::SignedRequest>(env.payload);
}

Bytes Server::reply(const wire::Envelope& request, wire::MsgType type, Bytes body) const {
  auto env = wire::respond(request, type, {}, clock_.now());
  msg::SignedResponse res;
  res.responder = id_;
  res.signature =
      crypto::sign(key_, msg::response_binding(env.msg_type, env.nonce, env.timestamp, id_, body));
  res.body = std::move(body);
  env.payload = canonical_encode(res);
  return wire::frame(env);
}

Bytes Server::handle(ByteView frame) {
  wire::Envelope request;
  try {
    request = wire::deframe(frame);
  } catch (const Error& e) {
    return reply(request, wire::MsgType::err, canonical_encode(msg::ErrorBody{e.code(), e.detail()}));
  }

  auto fresh = wire::check_freshness(request, clock_.now(), nonces_, skew_);
  if (fresh != wire::Freshness::accept) {
    auto code = fresh == wire::Freshness::stale_timestamp ? ErrorCode::stale_timestamp : ErrorCode::replayed_nonce;
    return reply(request, wire::MsgType::err, canonical_encode(msg::ErrorBody{code, {}}));
  }

  try {
    auto body = serve(request);
    return reply(request, wire::response_type(request.type()), std::move(body));
  } catch (const Error& e) {
    return reply(request, wire::MsgType::err, canonical_encode(msg::ErrorBody{e.code(), e.detail()}));
  } catch (const std::exception& e) {
    return reply(request, wire::MsgType::err, canonical_encode(msg::ErrorBody{ErrorCode::internal, e.what()}));
  }
}

}  // namespace vpki::rpc
