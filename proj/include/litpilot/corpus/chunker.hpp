#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "litpilot/corpus/document.hpp"

namespace litpilot::corpus {

struct ChunkPolicy {
  std::size_t max_tokens = 512;
  std::size_t overlap_tokens = 64;
  std::size_t min_tokens = 32;

  // Throws InvalidChunkPolicy unless 0 <= overlap < max and min <= max.
  void validate() const;
};

// Retrieval unit: a contiguous slice of one section body.
struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::vector<std::string> section_path;
  // Byte offsets [start, end) into the section body.
  std::size_t start = 0;
  std::size_t end = 0;
  // Bytes at the front of `text` repeated from the previous chunk of the same section.
  std::size_t overlap_bytes = 0;
  std::string text;
  std::size_t token_count = 0;

  bool operator==(const Chunk&) const = default;
};

// Splits every section body independently into windows of at most
// policy.max_tokens tokens. Window ends prefer sentence boundaries and fall
// back to token boundaries; consecutive windows share policy.overlap_tokens
// tokens. When the last window would contribute fewer than
// policy.min_tokens new tokens, the previous cut moves back to rebalance.
// Chunks never span two sections.
std::vector<Chunk> split_into_chunks(const PaperDocument& doc, const ChunkPolicy& policy);

// Window boundaries in token indices for one body; exposed for testing.
struct TokenWindow {
  std::size_t first = 0;  // first token index
  std::size_t last = 0;   // one past the last token index
};
std::vector<TokenWindow> plan_windows(const std::string& body, const ChunkPolicy& policy);

// Token indices at which a new sentence starts (index 0 excluded).
std::vector<std::size_t> sentence_starts(const std::string& body);

nlohmann::ordered_json to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& j);

}  // namespace litpilot::corpus
