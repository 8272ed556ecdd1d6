#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "litpilot/llm/backend.hpp"
#include "litpilot/llm/prompt.hpp"
#include "litpilot/retrieval/index.hpp"

namespace litpilot::query {

struct YearRange {
  std::optional<int> min;
  std::optional<int> max;

  bool operator==(const YearRange&) const = default;
};

struct StructuredQuery {
  std::vector<std::string> scholars;
  std::vector<std::string> institutions;
  std::vector<int> years;
  std::vector<YearRange> year_ranges;
  std::vector<std::string> domains;
  std::vector<std::string> keywords;
  std::string free_text;

  bool empty() const;
  // Smallest inclusive range covering every year and range (open ends stay open).
  std::optional<YearRange> year_bounds() const;
  bool operator==(const StructuredQuery&) const = default;
};

nlohmann::ordered_json to_json(const StructuredQuery& q);

enum class EntityType { kScholar, kInstitution, kDomain };

// Phrase lists for entity extraction. Phrases are unique across all three
// lists, compared case-insensitively.
class Gazetteer {
 public:
  // Throws InvalidGazetteer for an empty or duplicate phrase.
  void add(EntityType type, std::string phrase);
  // UTF-8 TSV: type (scholar | institution | domain) TAB phrase. Blank lines
  // and lines starting with '#' are skipped.
  static Gazetteer load(const std::filesystem::path& path);
  static Gazetteer parse(std::string_view tsv);

  struct Entry {
    EntityType type;
    std::string phrase;
    std::string lowered;
  };
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

// Trims the query, prompts "query_rewrite" and strips quotes and whitespace
// from the answer. A backend failure or empty answer falls back to
// clean_text(query). Throws EmptyQuery. `used_fallback` is set when given.
std::string rewrite_query(std::string_view user_query, llm::Backend& backend, const llm::PromptLibrary& prompts,
                          bool* used_fallback = nullptr);

// Leftmost-longest, non-overlapping, case-insensitive gazetteer matching at
// word boundaries; then "since YYYY" and "YYYY-YYYY" ranges and lone years in
// [1900, 2100]; every other non-stopword term becomes a keyword. free_text is
// the query with entity and year spans removed. Throws EmptyQuery.
StructuredQuery extract_entities(std::string_view query, const Gazetteer& gaz);

class SearchPlugin {
 public:
  virtual ~SearchPlugin() = default;
  virtual std::string name() const = 0;
  virtual std::vector<retrieval::SearchHit> execute(const StructuredQuery& q, std::size_t k) = 0;
};

using Registry = std::map<std::string, std::shared_ptr<SearchPlugin>>;

inline constexpr const char* kScholarPlugin = "scholar-index";
inline constexpr const char* kLocalPlugin = "local-index";

struct PluginResult {
  std::vector<retrieval::SearchHit> hits;
  std::optional<std::string> error;  // "<Kind>: <detail>" when the plugin failed
};

// Scholars or institutions route to "scholar-index"; domains, keywords or
// free text route to "local-index". Routed plugins run concurrently; a plugin
// failure is reported in its own entry. Throws NoPluginMatched when no routed
// plugin is registered, InvalidK when k is 0.
std::map<std::string, PluginResult> dispatch(const StructuredQuery& q, const Registry& registry, std::size_t k);

// Text the index plugins search with: domains then keywords, else the free text.
std::string search_text(const StructuredQuery& q);

}  // namespace litpilot::query
