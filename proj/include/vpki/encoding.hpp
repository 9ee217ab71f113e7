#pragma once

// Canonical byte encoding: fields in declaration order, unsigned integers
// fixed-width big-endian, byte strings and UTF-8 strings u32-length-prefixed,
// sequences u32-count-prefixed, fixed-size arrays raw. No padding.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "vpki/bytes.hpp"

namespace vpki {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void boolean(bool v) { u8(v ? 1 : 0); }
  void bytes(ByteView v);
  void str(std::string_view v);
  void raw(ByteView v) { out_.insert(out_.end(), v.begin(), v.end()); }
  template <std::size_t N>
  void fixed(const std::array<std::uint8_t, N>& v) {
    raw(v);
  }
  void count(std::size_t n);

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

/// Bounds-checked cursor. Every read past the end throws Error(decode_error).
class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  bool boolean();
  Bytes bytes();
  std::string str();
  ByteView raw(std::size_t n);
  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    std::array<std::uint8_t, N> out{};
    auto v = raw(N);
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  /// Sequence count, sanity-checked against the remaining input so a
  /// hostile count cannot trigger a huge allocation.
  std::size_t count(std::size_t min_element_size = 1);

  std::size_t remaining() const { return in_.size() - pos_; }
  bool at_end() const { return pos_ == in_.size(); }
  void expect_end() const;

 private:
  ByteView in_;
  std::size_t pos_ = 0;
};

inline constexpr std::uint32_t kMaxEncodedString = 16u << 20;

}  // namespace vpki
