#include "litpilot/retrieval/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::retrieval {
namespace {

constexpr std::size_t kSnippetChars = 200;

bool contains_ci(std::string_view haystack, std::string_view needle) {
  return utf8::ascii_lower(haystack).find(utf8::ascii_lower(needle)) != std::string::npos;
}

bool any_contains(const std::vector<std::string>& values, const std::vector<std::string>& wanted) {
  if (wanted.empty()) return true;
  for (const auto& w : wanted) {
    for (const auto& v : values) {
      if (contains_ci(v, w)) return true;
    }
  }
  return false;
}

double cosine(const std::vector<float>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return std::clamp(s, -1.0, 1.0);
}

bool hit_before(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.chunk_id < b.chunk_id;
}

std::vector<SearchHit> top_k(std::vector<SearchHit> hits, std::size_t k) {
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), hit_before);
  hits.resize(n);
  return hits;
}

SearchHit make_hit(const std::string& id, const StoredEntry& e, double score) {
  return {id, e.meta.doc_id, score, std::string(utf8::prefix_codepoints(e.text, kSnippetChars))};
}

std::vector<double> query_vector(const VectorIndex::State& s, const embedding::EmbeddingVector& q) {
  if (q.dim() != s.dim) {
    throw Error("DimensionMismatch", ErrorCategory::kInvalidInput,
                "query has dimension " + std::to_string(q.dim()) + ", index has " + std::to_string(s.dim));
  }
  return q.values;
}

void check_k(std::size_t k) {
  if (k == 0) throw invalid_input("InvalidK", "k must be at least 1");
}

StoredEntry to_stored(const IndexEntry& e) {
  StoredEntry s;
  s.vector.assign(e.vector.values.begin(), e.vector.values.end());
  s.text = e.text;
  s.meta = e.meta;
  for (const auto& t : corpus::terms(e.text)) ++s.term_counts[t];
  return s;
}

void add_terms(VectorIndex::State& s, const StoredEntry& e, int sign) {
  for (const auto& [t, n] : e.term_counts) {
    auto& df = s.doc_freq[t];
    df = static_cast<std::size_t>(static_cast<long long>(df) + sign);
    if (df == 0) s.doc_freq.erase(t);
  }
}

nlohmann::ordered_json meta_json(const std::string& id, const StoredEntry& e) {
  nlohmann::ordered_json j;
  j["chunk_id"] = id;
  j["doc_id"] = e.meta.doc_id;
  j["year"] = e.meta.year ? nlohmann::ordered_json(*e.meta.year) : nlohmann::ordered_json(nullptr);
  j["authors"] = e.meta.authors;
  j["institutions"] = e.meta.institutions;
  j["domain_tags"] = e.meta.domain_tags;
  j["venue"] = e.meta.venue ? nlohmann::ordered_json(*e.meta.venue) : nlohmann::ordered_json(nullptr);
  j["text"] = e.text;
  return j;
}

}  // namespace

void SearchFilter::validate() const {
  if (year_min && year_max && *year_min > *year_max) {
    throw invalid_input("InvalidFilter", "year range minimum exceeds maximum");
  }
}

nlohmann::ordered_json to_json(const SearchFilter& f) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (!f.scholars.empty()) j["scholars"] = f.scholars;
  if (!f.institutions.empty()) j["institutions"] = f.institutions;
  if (f.year_min) j["year_min"] = *f.year_min;
  if (f.year_max) j["year_max"] = *f.year_max;
  if (!f.domains.empty()) j["domains"] = f.domains;
  if (!f.keywords.empty()) j["keywords"] = f.keywords;
  if (!f.doc_ids.empty()) j["doc_ids"] = f.doc_ids;
  if (!f.exclude_doc_ids.empty()) j["exclude_doc_ids"] = f.exclude_doc_ids;
  return j;
}

SearchFilter filter_from_json(const nlohmann::json& j) {
  SearchFilter f;
  if (!j.is_object()) throw invalid_input("InvalidFilter", "filter must be an object");
  try {
    const auto list = [&](const char* key, std::vector<std::string>& out) {
      if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
    };
    list("scholars", f.scholars);
    list("institutions", f.institutions);
    list("domains", f.domains);
    list("keywords", f.keywords);
    list("doc_ids", f.doc_ids);
    list("exclude_doc_ids", f.exclude_doc_ids);
    if (j.contains("year_min") && !j["year_min"].is_null()) f.year_min = j["year_min"].get<int>();
    if (j.contains("year_max") && !j["year_max"].is_null()) f.year_max = j["year_max"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidFilter", e.what());
  }
  f.validate();
  return f;
}

nlohmann::ordered_json to_json(const SearchHit& h) {
  nlohmann::ordered_json j;
  j["chunk_id"] = h.chunk_id;
  j["doc_id"] = h.doc_id;
  j["score"] = h.score;
  j["snippet"] = h.snippet;
  return j;
}

bool passes(const StoredEntry& e, const SearchFilter& f) {
  if (!f.doc_ids.empty() && std::find(f.doc_ids.begin(), f.doc_ids.end(), e.meta.doc_id) == f.doc_ids.end()) {
    return false;
  }
  if (std::find(f.exclude_doc_ids.begin(), f.exclude_doc_ids.end(), e.meta.doc_id) != f.exclude_doc_ids.end()) {
    return false;
  }
  if (f.year_min || f.year_max) {
    if (!e.meta.year) return false;
    if (f.year_min && *e.meta.year < *f.year_min) return false;
    if (f.year_max && *e.meta.year > *f.year_max) return false;
  }
  if (!any_contains(e.meta.authors, f.scholars)) return false;
  if (!any_contains(e.meta.institutions, f.institutions)) return false;
  if (!any_contains(e.meta.domain_tags, f.domains)) return false;
  for (const auto& kw : f.keywords) {
    if (!contains_ci(e.text, kw)) return false;
  }
  return true;
}

std::vector<std::string> query_terms(std::string_view query_text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& t : corpus::terms(query_text)) {
    if (corpus::is_stopword(t) || !seen.insert(t).second) continue;
    out.push_back(std::move(t));
  }
  return out;
}

double keyword_score(const VectorIndex::State& s, const StoredEntry& e, const std::vector<std::string>& terms) {
  const double n = static_cast<double>(s.entries.size());
  double score = 0.0;
  for (const auto& t : terms) {
    const auto tf = e.term_counts.find(t);
    if (tf == e.term_counts.end()) continue;
    const auto df = s.doc_freq.find(t);
    const double d = df == s.doc_freq.end() ? 0.0 : static_cast<double>(df->second);
    score += static_cast<double>(tf->second) * (std::log((n + 1.0) / (d + 1.0)) + 1.0);
  }
  return score;
}

VectorIndex::VectorIndex(std::size_t dim) {
  if (dim == 0) throw invalid_input("InvalidIndex", "dimension must be positive");
  auto s = std::make_shared<State>();
  s->dim = dim;
  state_ = std::move(s);
}

std::shared_ptr<const VectorIndex::State> VectorIndex::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::size_t VectorIndex::dim() const { return snapshot()->dim; }
std::size_t VectorIndex::size() const { return snapshot()->entries.size(); }

void VectorIndex::upsert(const std::vector<IndexEntry>& entries) {
  std::lock_guard lock(mu_);
  for (const auto& e : entries) {
    if (e.vector.dim() != state_->dim) {
      throw Error("DimensionMismatch", ErrorCategory::kInvalidInput,
                  "entry " + e.chunk_id + " has dimension " + std::to_string(e.vector.dim()) + ", index has " +
                      std::to_string(state_->dim));
    }
    const double norm = std::sqrt(embedding::dot(e.vector.values, e.vector.values));
    if (!(std::abs(norm - 1.0) <= 1e-6)) {
      throw invalid_input("InvalidVector", "entry " + e.chunk_id + " is not unit norm");
    }
    if (e.chunk_id.empty()) throw invalid_input("InvalidEntry", "empty chunk_id");
  }
  auto next = std::make_shared<State>(*state_);
  for (const auto& e : entries) {
    auto stored = to_stored(e);
    auto it = next->entries.find(e.chunk_id);
    if (it != next->entries.end()) {
      add_terms(*next, it->second, -1);
      it->second = std::move(stored);
    } else {
      it = next->entries.emplace(e.chunk_id, std::move(stored)).first;
    }
    add_terms(*next, it->second, +1);
  }
  state_ = std::move(next);
}

std::size_t VectorIndex::remove_doc(const std::string& doc_id) {
  std::lock_guard lock(mu_);
  auto next = std::make_shared<State>(*state_);
  std::size_t removed = 0;
  for (auto it = next->entries.begin(); it != next->entries.end();) {
    if (it->second.meta.doc_id == doc_id) {
      add_terms(*next, it->second, -1);
      it = next->entries.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  if (removed) state_ = std::move(next);
  return removed;
}

std::optional<IndexEntry> VectorIndex::get(const std::string& chunk_id) const {
  const auto s = snapshot();
  const auto it = s->entries.find(chunk_id);
  if (it == s->entries.end()) return std::nullopt;
  IndexEntry e;
  e.chunk_id = chunk_id;
  e.vector.values.assign(it->second.vector.begin(), it->second.vector.end());
  e.text = it->second.text;
  e.meta = it->second.meta;
  return e;
}

std::vector<SearchHit> VectorIndex::vector_search(const embedding::EmbeddingVector& query,
                                                  const SearchFilter& filter, std::size_t k) const {
  check_k(k);
  filter.validate();
  const auto s = snapshot();
  const auto q = query_vector(*s, query);
  std::vector<SearchHit> hits;
  for (const auto& [id, e] : s->entries) {
    if (passes(e, filter)) hits.push_back(make_hit(id, e, cosine(e.vector, q)));
  }
  return top_k(std::move(hits), k);
}

std::vector<SearchHit> VectorIndex::hybrid_search(std::string_view query_text,
                                                  const embedding::EmbeddingVector& query,
                                                  const SearchFilter& filter, std::size_t k,
                                                  const HybridWeights& weights) const {
  check_k(k);
  filter.validate();
  const auto s = snapshot();
  const auto q = query_vector(*s, query);
  const auto terms = query_terms(query_text);

  struct Candidate {
    const std::string* id;
    const StoredEntry* entry;
    double cos;
    double kw;
  };
  std::vector<Candidate> cands;
  double max_kw = 0.0;
  for (const auto& [id, e] : s->entries) {
    if (!passes(e, filter)) continue;
    const double kw = keyword_score(*s, e, terms);
    max_kw = std::max(max_kw, kw);
    cands.push_back({&id, &e, cosine(e.vector, q), kw});
  }
  std::vector<SearchHit> hits;
  hits.reserve(cands.size());
  for (const auto& c : cands) {
    const double norm_kw = max_kw > 0.0 ? c.kw / max_kw : 0.0;
    hits.push_back(make_hit(*c.id, *c.entry, weights.vector * c.cos + weights.keyword * norm_kw));
  }
  return top_k(std::move(hits), k);
}

void VectorIndex::save(const std::filesystem::path& dir) const {
  const auto s = snapshot();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create index directory " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["format"] = "litpilot-index-v1";
  meta["dimension"] = s->dim;
  meta["count"] = s->entries.size();
  meta["entries"] = nlohmann::ordered_json::array();
  for (const auto& [id, e] : s->entries) meta["entries"].push_back(meta_json(id, e));

  std::ofstream vec(dir / "vectors.bin", std::ios::binary | std::ios::trunc);
  if (!vec) throw io_error("cannot write " + (dir / "vectors.bin").string());
  std::vector<unsigned char> row(s->dim * 4);
  for (const auto& [id, e] : s->entries) {
    for (std::size_t i = 0; i < s->dim; ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(e.vector[i]);
      for (int b = 0; b < 4; ++b) row[i * 4 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
    }
    vec.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!vec) throw io_error("short write to vectors.bin");

  std::ofstream m(dir / "meta.json", std::ios::trunc);
  if (!m) throw io_error("cannot write " + (dir / "meta.json").string());
  m << meta.dump(1) << "\n";
  if (!m) throw io_error("short write to meta.json");
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  std::ifstream m(dir / "meta.json");
  if (!m) throw io_error("cannot open " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidIndexFile", std::string("meta.json: ") + e.what());
  }
  std::ifstream vec(dir / "vectors.bin", std::ios::binary);
  if (!vec) throw io_error("cannot open " + (dir / "vectors.bin").string());

  try {
    const std::size_t dim = meta.at("dimension").get<std::size_t>();
    const std::size_t count = meta.at("count").get<std::size_t>();
    const auto& list = meta.at("entries");
    if (list.size() != count) throw invalid_input("InvalidIndexFile", "entry count does not match meta count");
    VectorIndex index(dim);
    auto state = std::make_shared<State>();
    state->dim = dim;
    std::vector<unsigned char> row(dim * 4);
    for (const auto& j : list) {
      vec.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
      if (vec.gcount() != static_cast<std::streamsize>(row.size())) {
        throw invalid_input("InvalidIndexFile", "vectors.bin is shorter than meta.json says");
      }
      StoredEntry e;
      e.vector.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(row[i * 4 + b]) << (8 * b);
        e.vector[i] = std::bit_cast<float>(bits);
      }
      e.text = j.at("text").get<std::string>();
      e.meta.doc_id = j.at("doc_id").get<std::string>();
      if (!j.at("year").is_null()) e.meta.year = j.at("year").get<int>();
      e.meta.authors = j.at("authors").get<std::vector<std::string>>();
      e.meta.institutions = j.at("institutions").get<std::vector<std::string>>();
      e.meta.domain_tags = j.at("domain_tags").get<std::vector<std::string>>();
      if (!j.at("venue").is_null()) e.meta.venue = j.at("venue").get<std::string>();
      for (const auto& t : corpus::terms(e.text)) ++e.term_counts[t];
      const auto id = j.at("chunk_id").get<std::string>();
      auto [it, inserted] = state->entries.emplace(id, std::move(e));
      if (!inserted) throw invalid_input("InvalidIndexFile", "duplicate chunk_id " + id);
      add_terms(*state, it->second, +1);
    }
    if (vec.peek() != std::char_traits<char>::eof()) {
      throw invalid_input("InvalidIndexFile", "vectors.bin is longer than meta.json says");
    }
    index.state_ = std::move(state);
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidIndexFile", std::string("meta.json: ") + e.what());
  }
}

}  // namespace litpilot::retrieval
