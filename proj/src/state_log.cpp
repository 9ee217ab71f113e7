#include "vpki/state_log.hpp"

#include <cstring>
#include <filesystem>

#include "vpki/errors.hpp"

namespace vpki {

namespace {

// Length of the prefix made of complete records.
std::size_t complete_prefix(const Bytes& data) {
  std::size_t pos = 0;
  while (data.size() - pos >= 8) {
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = len << 8 | data[pos + i];
    if (len < 4 || data.size() - pos - 4 < len) break;
    pos += 4 + len;
  }
  return pos;
}

}  // namespace

StateLog::StateLog(std::string path) : path_(std::move(path)) {
  // Drop a torn tail so later appends stay reachable on replay.
  std::error_code ec;
  if (std::filesystem::exists(path_, ec)) {
    auto data = read_file(path_);
    auto keep = complete_prefix(data);
    if (keep != data.size()) std::filesystem::resize_file(path_, keep, ec);
  }
  out_ = std::fopen(path_.c_str(), "ab");
  if (out_ == nullptr) throw Error(ErrorCode::io_error, "cannot open state file " + path_ + ": " + std::strerror(errno));
}

StateLog::~StateLog() {
  if (out_ != nullptr) std::fclose(out_);
}

void StateLog::replay(const Visitor& visit) const {
  auto data = read_file(path_);
  auto end = complete_prefix(data);
  std::size_t pos = 0;
  while (pos < end) {
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = len << 8 | data[pos + i];
    TypeTag tag;
    std::memcpy(tag.data(), data.data() + pos + 4, 4);
    visit(tag, ByteView(data).subspan(pos + 8, len - 4));
    pos += 4 + len;
  }
}

void StateLog::append(const TypeTag& tag, ByteView body) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(body.size() + 4));
  w.raw(tag);
  w.raw(body);
  std::lock_guard lock(mu_);
  const auto& bytes = w.data();
  if (std::fwrite(bytes.data(), 1, bytes.size(), out_) != bytes.size() || std::fflush(out_) != 0)
    throw Error(ErrorCode::io_error, "append to " + path_ + " failed");
}

void append_key_record(StateLog& log, const CaId& id, const crypto::PrivateKey& key) {
  Writer w;
  w.str(id);
  w.bytes(key.export_scalar());
  log.append(kKeyRecordTag, w.data());
}

crypto::PrivateKey load_key_record(const StateLog& log, const CaId& id) {
  std::optional<crypto::PrivateKey> key;
  log.replay([&](const TypeTag& tag, ByteView body) {
    if (tag != kKeyRecordTag) return;
    Reader r(body);
    auto owner = r.str();
    auto scalar = r.bytes();
    if (owner == id) key = crypto::PrivateKey::from_scalar(scalar);
  });
  if (!key) throw Error(ErrorCode::io_error, "no signing key for " + id + " in " + log.path());
  return *key;
}

}  // namespace vpki
