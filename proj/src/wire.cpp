#include "vpki/wire.hpp"

#include <algorithm>

#include "vpki/encoding.hpp"
#include "vpki/errors.hpp"

namespace vpki::wire {

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::ticket_req: return "ticket_req";
    case MsgType::ticket_res: return "ticket_res";
    case MsgType::psnym_req: return "psnym_req";
    case MsgType::psnym_res: return "psnym_res";
    case MsgType::ftkt_req: return "ftkt_req";
    case MsgType::ftkt_res: return "ftkt_res";
    case MsgType::ntkt_req: return "ntkt_req";
    case MsgType::ntkt_res: return "ntkt_res";
    case MsgType::crl_req: return "crl_req";
    case MsgType::crl_res: return "crl_res";
    case MsgType::ocsp_req: return "ocsp_req";
    case MsgType::ocsp_res: return "ocsp_res";
    case MsgType::resolve_req: return "resolve_req";
    case MsgType::resolve_res: return "resolve_res";
    case MsgType::resolve_map_req: return "resolve_map_req";
    case MsgType::resolve_map_res: return "resolve_map_res";
    case MsgType::resolve_ticket_req: return "resolve_ticket_req";
    case MsgType::resolve_ticket_res: return "resolve_ticket_res";
    case MsgType::dir_req: return "dir_req";
    case MsgType::dir_res: return "dir_res";
    case MsgType::reg_req: return "reg_req";
    case MsgType::reg_res: return "reg_res";
    case MsgType::ltc_update_req: return "ltc_update_req";
    case MsgType::ltc_update_res: return "ltc_update_res";
    case MsgType::err: return "err";
  }
  return "unknown";
}

MsgType response_type(MsgType request) {
  if (request == MsgType::err) return MsgType::err;
  return static_cast<MsgType>(static_cast<std::uint16_t>(request) + 1);
}

ChannelAuthMode required_auth(MsgType request) {
  switch (request) {
    case MsgType::ticket_req:
    case MsgType::ftkt_req:
    case MsgType::ltc_update_req:
      return ChannelAuthMode::mutual;
    default:
      return ChannelAuthMode::server_only;
  }
}

Bytes frame(const Envelope& env) {
  if (env.payload.size() > kMaxPayloadBytes) throw Error(ErrorCode::frame_error, "payload exceeds 16 MiB");
  Writer w;
  w.raw(kMagic);
  w.u8(kVersion);
  w.u16(env.msg_type);
  w.u64(env.nonce);
  w.i64(env.timestamp);
  w.u32(static_cast<std::uint32_t>(env.payload.size()));
  w.raw(env.payload);
  return std::move(w).take();
}

std::size_t payload_length_from_header(ByteView header) {
  if (header.size() < kHeaderBytes) throw Error(ErrorCode::frame_error, "truncated header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), header.begin()))
    throw Error(ErrorCode::frame_error, "bad magic");
  if (header[4] != kVersion) throw Error(ErrorCode::frame_error, "unsupported version");
  std::size_t len = 0;
  for (std::size_t i = kHeaderBytes - 4; i < kHeaderBytes; ++i) len = len << 8 | header[i];
  if (len > kMaxPayloadBytes) throw Error(ErrorCode::frame_error, "payload exceeds 16 MiB");
  return len;
}

Envelope deframe(ByteView bytes) {
  auto len = payload_length_from_header(bytes);
  if (bytes.size() != kHeaderBytes + len) throw Error(ErrorCode::frame_error, "length mismatch");
  Reader r(bytes.subspan(5));
  Envelope env;
  env.msg_type = r.u16();
  env.nonce = r.u64();
  env.timestamp = r.i64();
  r.u32();
  auto payload = r.raw(len);
  env.payload.assign(payload.begin(), payload.end());
  return env;
}

bool NonceCache::check_and_insert(std::uint64_t nonce, TimePoint now) {
  std::lock_guard lock(mu_);
  prune(now);
  auto [it, inserted] = seen_.try_emplace(nonce, now);
  if (!inserted) return false;
  order_.emplace_back(now, nonce);
  return true;
}

std::size_t NonceCache::size() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

void NonceCache::prune(TimePoint now) {
  while (!order_.empty() && order_.front().first < now - retention_) {
    auto [t, nonce] = order_.front();
    order_.pop_front();
    auto it = seen_.find(nonce);
    if (it != seen_.end() && it->second == t) seen_.erase(it);
  }
}

Freshness check_freshness(const Envelope& env, TimePoint now, NonceCache& seen, TimePoint skew_seconds) {
  auto delta = env.timestamp > now ? env.timestamp - now : now - env.timestamp;
  if (delta > skew_seconds) return Freshness::stale_timestamp;
  if (!seen.check_and_insert(env.nonce, now)) return Freshness::replayed_nonce;
  return Freshness::accept;
}

Envelope respond(const Envelope& request, MsgType type, Bytes body, TimePoint now) {
  Envelope out;
  out.msg_type = static_cast<std::uint16_t>(type);
  out.nonce = request.nonce + 1;  // unsigned wraparound
  out.timestamp = now;
  out.payload = std::move(body);
  return out;
}

}  // namespace vpki::wire
