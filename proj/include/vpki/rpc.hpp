#pragma once

// Request/response plumbing shared by every service: freshness, requester
// signatures, signed responses and error envelopes on the server side;
// nonce and responder-signature checks on the client side.

#include <functional>
#include <memory>
#include <optional>

#include "vpki/clock.hpp"
#include "vpki/credentials.hpp"
#include "vpki/messages.hpp"
#include "vpki/transport.hpp"
#include "vpki/wire.hpp"

namespace vpki::rpc {

/// Maps an authority id to a way of reaching it (directory lookup,
/// in-process table, ...). Returns nullptr when unknown.
using Resolver = std::function<std::shared_ptr<transport::Endpoint>(const CaId&)>;

/// Client side of one exchange.
class Client {
 public:
  Client(std::shared_ptr<transport::Endpoint> endpoint, std::shared_ptr<const TrustStore> trust,
         const Clock& clock)
      : endpoint_(std::move(endpoint)), trust_(std::move(trust)), clock_(clock) {}

  /// Sends `body` (wrapped in a SignedRequest when `signer` is set) and
  /// returns the verified response body. Error envelopes are rethrown as
  /// Error with the server's code; a wrong nonce, wrong message type,
  /// unexpected responder or bad responder signature is ResponseInvalid.
  Bytes call(wire::MsgType type, ByteView body, const CaId& expected_responder,
             const crypto::PrivateKey* signer = nullptr) const;

  /// Same exchange on a pre-built request envelope; exposed for replay tests.
  Bytes call_envelope(const wire::Envelope& request, const CaId& expected_responder) const;

  const std::shared_ptr<transport::Endpoint>& endpoint() const { return endpoint_; }

 private:
  std::shared_ptr<transport::Endpoint> endpoint_;
  std::shared_ptr<const TrustStore> trust_;
  const Clock& clock_;
};

/// Builds a request envelope with a fresh random nonce.
wire::Envelope make_request(wire::MsgType type, ByteView body, TimePoint now,
                            const crypto::PrivateKey* signer = nullptr);

/// Checks a SignedRequest against the envelope header it arrived in.
bool verify_request(const wire::Envelope& env, const msg::SignedRequest& req, const PublicKey& key);

/// Server base: implements Handler. Subclasses decode and serve the payload.
class Server : public transport::Handler {
 public:
  Server(CaId id, crypto::PrivateKey key, const Clock& clock, TimePoint skew_seconds = wire::kDefaultSkewSeconds);

  Bytes handle(ByteView frame) final;

  const CaId& id() const { return id_; }
  const Clock& clock() const { return clock_; }
  const crypto::PrivateKey& signing_key() const { return key_; }

 protected:
  /// Returns the response body for an accepted, fresh request; throws Error
  /// for protocol failures.
  virtual Bytes serve(const wire::Envelope& request) = 0;

  /// Unwraps a SignedRequest and checks its signature with `key`.
  static msg::SignedRequest open_signed(const wire::Envelope& env);

 private:
  Bytes reply(const wire::Envelope& request, wire::MsgType type, Bytes body) const;

  CaId id_;
  crypto::PrivateKey key_;
  const Clock& clock_;
  TimePoint skew_;
  wire::NonceCache nonces_;
};

}  // namespace vpki::rpc
