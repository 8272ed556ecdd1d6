#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "litpilot/corpus/document.hpp"
#include "litpilot/embedding/projection.hpp"
#include "litpilot/kb/knowledge_base.hpp"
#include "litpilot/llm/backend.hpp"
#include "litpilot/llm/prompt.hpp"
#include "litpilot/query/query.hpp"

namespace litpilot::investigation {

struct KeywordScore {
  std::string term;
  double score = 0.0;

  bool operator==(const KeywordScore&) const = default;
};

struct SummaryStats {
  std::map<int, std::size_t> year_histogram;
  double trend_slope = 0.0;
  std::vector<KeywordScore> top_keywords;     // <= 10, score descending
  std::vector<KeywordScore> recent_keywords;  // same, over the latest year's papers
  std::size_t paper_count = 0;
  std::size_t undated_count = 0;  // histogram total + undated_count == paper_count

  bool operator==(const SummaryStats&) const = default;
};

nlohmann::ordered_json to_json(const SummaryStats& s);

// Least-squares slope of count against year over [min, max] with absent
// years counted as 0. Zero for fewer than two distinct years.
double trend_slope(const std::map<int, std::size_t>& histogram);

// tf-idf over title+abstract terms: tf summed over `papers`, idf from
// `reference` as ln((N + 1) / (df + 1)) + 1. An empty reference means
// `papers` itself. Ties are broken by term.
std::vector<KeywordScore> top_keywords(const std::vector<corpus::PaperDocument>& papers,
                                       const std::vector<corpus::PaperDocument>& reference, std::size_t limit = 10);

SummaryStats compute_summary_stats(const std::vector<corpus::PaperDocument>& papers,
                                   const std::vector<corpus::PaperDocument>& reference = {});

struct ClusterAssignment {
  std::size_t k = 0;
  std::map<std::string, std::size_t> labels;
  std::vector<embedding::EmbeddingVector> centroids;
  double objective = 0.0;
  std::vector<double> objective_trace;  // after each Lloyd iteration
  std::size_t iterations = 0;
};

// Squared-distance objective of an assignment with unit-norm centroids
// (normalized cluster means, the optimal unit centroids for that assignment).
double assignment_objective(const std::vector<embedding::EmbeddingVector>& points,
                            const std::vector<std::size_t>& labels, std::size_t k);

// Spherical k-means: k-means++ seeding, then Lloyd iterations with unit
// centroids until the assignment stops changing or 100 iterations. An empty
// cluster takes the point farthest from its centroid in the largest cluster.
// Ten seedings are drawn from one Rng(seed) and the lowest final objective
// wins (earliest on ties); objective_trace belongs to that run.
// Points are taken in doc_id order. Throws InvalidK unless 1 <= k <= n.
ClusterAssignment cluster_papers(const std::map<std::string, embedding::EmbeddingVector>& vectors, std::size_t k,
                                 std::uint64_t seed);

struct TopicSearchDeps {
  llm::Backend& backend;
  const llm::PromptLibrary& prompts;
  const query::Gazetteer& gazetteer;
  const query::Registry& plugins;
  const kb::KnowledgeBase& kb;
};

struct TopicSearchResult {
  std::string rewritten_query;
  bool rewrite_fallback = false;
  query::StructuredQuery structured;
  std::vector<retrieval::SearchHit> hits;  // one per paper, score descending
  std::map<std::string, std::string> plugin_errors;
  SummaryStats stats;
  std::string summary;
  bool degraded = false;
  std::string warning;
};

nlohmann::ordered_json to_json(const TopicSearchResult& r);

// rewrite -> extract -> dispatch -> merge per paper -> stats -> summary.
// Throws EmptyQuery and NoPluginMatched; a failed summary prompt only
// degrades the result.
TopicSearchResult topic_search(std::string_view user_query, const TopicSearchDeps& deps, std::size_t k);

struct ScholarGroup {
  std::string label;
  std::vector<std::string> doc_ids;
};

struct ScholarSurvey {
  std::string name;
  std::vector<ScholarGroup> groups;  // by size descending
};

nlohmann::ordered_json to_json(const ScholarSurvey& s);

// Papers whose author list has a case-insensitive substring match for `name`,
// clustered with k = min(ceil(n / 3), 5) and labeled by the backend.
// Throws EmptyName, ScholarNotFound.
ScholarSurvey scholar_survey(const std::string& name, const kb::KnowledgeBase& kb, llm::Backend& backend,
                             const llm::PromptLibrary& prompts, std::uint64_t seed = 0);

inline constexpr std::size_t kReviewLimit = 30;

struct ReviewSection {
  std::string heading;
  std::vector<std::string> doc_ids;
  std::string text;
};

struct BibEntry {
  std::size_t ref = 0;
  std::string doc_id;
  std::string citation;
};

struct ReviewOutline {
  std::string title;
  std::string introduction;
  std::vector<ReviewSection> body_sections;
  std::string conclusion;
  std::vector<BibEntry> bibliography;
  std::size_t citation_violations = 0;
};

nlohmann::ordered_json to_json(const ReviewOutline& r);
std::string to_markdown(const ReviewOutline& r);

// "Authors (Year). Title. Venue." with absent parts left out.
std::string citation_string(const corpus::PaperDocument& doc);

// Every [n] / [n, m] marker in the text, in order.
std::vector<std::size_t> citation_markers(const std::string& text);

// Clusters the papers (k = min(ceil(n / 5), 6)), prompts one section per
// cluster, the introduction and the conclusion, then renumbers citations in
// first-citation order and strips markers that do not resolve.
// Throws EmptyDocList, LimitExceeded (limit 30), DuplicateDocId, UnknownDocId,
// BackendFailure; all checks happen before the first backend call.
ReviewOutline generate_review(const std::vector<std::string>& doc_ids, const kb::KnowledgeBase& kb,
                              llm::Backend& backend, const llm::PromptLibrary& prompts, std::uint64_t seed = 0);

}  // namespace litpilot::investigation
