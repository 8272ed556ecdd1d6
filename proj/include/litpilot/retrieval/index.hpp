#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "litpilot/embedding/projection.hpp"

namespace litpilot::retrieval {

struct EntryMeta {
  std::string doc_id;
  std::optional<int> year;
  std::vector<std::string> authors;
  std::vector<std::string> institutions;
  std::vector<std::string> domain_tags;
  std::optional<std::string> venue;

  bool operator==(const EntryMeta&) const = default;
};

struct IndexEntry {
  std::string chunk_id;
  embedding::EmbeddingVector vector;
  std::string text;
  EntryMeta meta;
};

// All fields optional; conjunctive across fields, disjunctive within one.
// Keywords are the exception: every keyword must occur in the chunk text.
struct SearchFilter {
  std::vector<std::string> scholars;
  std::vector<std::string> institutions;
  std::optional<int> year_min;
  std::optional<int> year_max;
  std::vector<std::string> domains;
  std::vector<std::string> keywords;
  std::vector<std::string> doc_ids;  // exact match
  std::vector<std::string> exclude_doc_ids;

  // Throws InvalidFilter when year_min > year_max.
  void validate() const;
};

nlohmann::ordered_json to_json(const SearchFilter& f);
SearchFilter filter_from_json(const nlohmann::json& j);

struct SearchHit {
  std::string chunk_id;
  std::string doc_id;
  double score = 0.0;
  std::string snippet;  // first <= 200 code points of the chunk text

  bool operator==(const SearchHit&) const = default;
};

nlohmann::ordered_json to_json(const SearchHit& h);

struct HybridWeights {
  double vector = 0.7;
  double keyword = 0.3;
};

// Stored form of an entry. Vectors are kept as float32, which is also the
// on-disk precision, so a reloaded index scores bit-identically.
struct StoredEntry {
  std::vector<float> vector;
  std::string text;
  EntryMeta meta;
  std::map<std::string, std::uint32_t> term_counts;
};

// Exact cosine / hybrid index over chunks. Readers work on an immutable
// snapshot, so a search that overlaps an upsert sees the state from before
// the upsert.
class VectorIndex {
 public:
  struct State {
    std::size_t dim = 0;
    std::map<std::string, StoredEntry> entries;            // by chunk_id
    std::map<std::string, std::size_t> doc_freq;           // term -> #entries
  };

  explicit VectorIndex(std::size_t dim);
  VectorIndex(const VectorIndex& other) : state_(other.snapshot()) {}
  VectorIndex& operator=(const VectorIndex& other) {
    auto s = other.snapshot();
    std::lock_guard lock(mu_);
    state_ = std::move(s);
    return *this;
  }

  std::size_t dim() const;
  std::size_t size() const;
  std::shared_ptr<const State> snapshot() const;

  // Replaces entries with known chunk_ids and inserts the rest. Throws
  // DimensionMismatch or InvalidVector (not unit norm) before changing anything.
  void upsert(const std::vector<IndexEntry>& entries);
  // Drops every entry of the document; returns how many were removed.
  std::size_t remove_doc(const std::string& doc_id);

  std::optional<IndexEntry> get(const std::string& chunk_id) const;

  std::vector<SearchHit> vector_search(const embedding::EmbeddingVector& query, const SearchFilter& filter,
                                       std::size_t k) const;
  std::vector<SearchHit> hybrid_search(std::string_view query_text, const embedding::EmbeddingVector& query,
                                       const SearchFilter& filter, std::size_t k,
                                       const HybridWeights& weights = {}) const;

  // Directory with meta.json and vectors.bin.
  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const State> state_;
};

bool passes(const StoredEntry& e, const SearchFilter& f);

// Distinct non-stopword query terms, in first-occurrence order.
std::vector<std::string> query_terms(std::string_view query_text);

// sum over query terms t present in the entry of tf(t) * (ln((N + 1) / (df(t) + 1)) + 1)
double keyword_score(const VectorIndex::State& s, const StoredEntry& e, const std::vector<std::string>& terms);

}  // namespace litpilot::retrieval
