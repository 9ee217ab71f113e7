#include "vpki/encoding.hpp"

#include "vpki/errors.hpp"

namespace vpki {

void Writer::u16(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
  out_.push_back(static_cast<std::uint8_t>(v));
}

void Writer::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::bytes(ByteView v) {
  if (v.size() > kMaxEncodedString) throw Error(ErrorCode::invalid_argument, "byte string too long");
  u32(static_cast<std::uint32_t>(v.size()));
  raw(v);
}

void Writer::str(std::string_view v) {
  bytes(ByteView(reinterpret_cast<const std::uint8_t*>(v.data()), v.size()));
}

void Writer::count(std::size_t n) {
  if (n > 0xffffffffu) throw Error(ErrorCode::invalid_argument, "sequence too long");
  u32(static_cast<std::uint32_t>(n));
}

ByteView Reader::raw(std::size_t n) {
  if (n > remaining()) throw Error(ErrorCode::decode_error, "truncated input");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Reader::u8() { return raw(1)[0]; }

std::uint16_t Reader::u16() {
  auto b = raw(2);
  return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
}

std::uint32_t Reader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (auto x : b) v = v << 8 | x;
  return v;
}

std::uint64_t Reader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (auto x : b) v = v << 8 | x;
  return v;
}

bool Reader::boolean() {
  auto v = u8();
  if (v > 1) throw Error(ErrorCode::decode_error, "boolean out of range");
  return v == 1;
}

Bytes Reader::bytes() {
  auto n = u32();
  auto v = raw(n);
  return Bytes(v.begin(), v.end());
}

std::string Reader::str() {
  auto n = u32();
  auto v = raw(n);
  return std::string(v.begin(), v.end());
}

std::size_t Reader::count(std::size_t min_element_size) {
  auto n = u32();
  if (min_element_size > 0 && n > remaining() / min_element_size)
    throw Error(ErrorCode::decode_error, "sequence count exceeds input");
  return n;
}

void Reader::expect_end() const {
  if (!at_end()) throw Error(ErrorCode::decode_error, "trailing bytes");
}

}  // namespace vpki
