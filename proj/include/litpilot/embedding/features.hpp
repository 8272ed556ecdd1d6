#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "litpilot/util/hash.hpp"

namespace litpilot::embedding {

inline constexpr std::uint32_t kFeatureBits = 15;
inline constexpr std::uint32_t kFeatureDim = 1u << kFeatureBits;

// Sparse count vector over hashed character n-grams; entries sorted by
// index with no duplicates.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const noexcept { return entries.empty(); }
  double weight(std::uint32_t index) const;
  bool operator==(const FeatureVector&) const = default;
};

// Bucket of one n-gram: FNV-1a 64 of its UTF-8 bytes, mod 2^15.
constexpr std::uint32_t ngram_bucket(std::string_view ngram) noexcept {
  return static_cast<std::uint32_t>(fnv1a64(ngram) % kFeatureDim);
}

// Lowercases ASCII and collapses whitespace runs to a single space (trimmed).
std::string normalize_for_features(std::string_view text);

// Character 2- and 3-grams (over code points) of the normalized text, hashed
// into 2^15 buckets; each occurrence adds 1 to its bucket.
FeatureVector featurize(std::string_view text);

}  // namespace litpilot::embedding
