#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace litpilot {

// 64-bit FNV-1a over the raw bytes of `data`.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// First 16 hex characters of sha256_hex; the id format for documents and chunks.
inline std::string content_id(std::string_view data) { return sha256_hex(data).substr(0, 16); }

}  // namespace litpilot
