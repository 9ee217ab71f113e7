#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vpki {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Seconds since the Unix epoch (or since a simulation origin).
using TimePoint = std::int64_t;
using SerialNumber = std::uint64_t;

Bytes to_bytes(std::string_view s);
std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

/// True if `needle` occurs anywhere in `haystack`.
bool contains_subsequence(ByteView haystack, ByteView needle);

}  // namespace vpki
