#pragma once

#include <cstdio>
#include <functional>
#include <mutex>
#include <string>

#include "vpki/credentials.hpp"

namespace vpki {

/// Append-only record file backing a service's persistent tables. Each
/// record is u32 length | 4-byte tag | canonical body. A torn final record
/// (crash mid-append) is ignored on replay.
class StateLog {
 public:
  explicit StateLog(std::string path);
  ~StateLog();
  StateLog(const StateLog&) = delete;
  StateLog& operator=(const StateLog&) = delete;

  using Visitor = std::function<void(const TypeTag& tag, ByteView body)>;
  /// Visits every complete record in file order.
  void replay(const Visitor& visit) const;
  void append(const TypeTag& tag, ByteView body);

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
  std::FILE* out_ = nullptr;
};

/// Server signing key record, written once by the admin bootstrap.
inline constexpr TypeTag kKeyRecordTag{'K', 'E', 'Y', '1'};
void append_key_record(StateLog& log, const CaId& id, const crypto::PrivateKey& key);
/// Throws Error(io_error) if the log holds no key for `id`.
crypto::PrivateKey load_key_record(const StateLog& log, const CaId& id);

}  // namespace vpki
