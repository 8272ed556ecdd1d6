#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "litpilot/corpus/chunker.hpp"
#include "litpilot/corpus/document.hpp"
#include "litpilot/embedding/projection.hpp"
#include "litpilot/kb/knowledge_base.hpp"
#include "litpilot/llm/backend.hpp"
#include "litpilot/llm/prompt.hpp"
#include "litpilot/query/query.hpp"

namespace litpilot::reading {

inline constexpr double kDefaultTheta = 0.25;
inline constexpr std::size_t kDefaultSegments = 5;
inline constexpr std::size_t kMinCompare = 2;
inline constexpr std::size_t kMaxCompare = 5;

enum class Route { kInPaper, kOutOfPaper };

std::string_view to_string(Route r);

struct RoutedQuestion {
  std::string question;
  Route route = Route::kInPaper;
  double evidence = 0.0;      // max cosine against the paper's chunks
  bool used_fallback = false;  // backend answer missing or unusable
};

// Max cosine between the question and the chunk texts; 0 when the question
// has nothing to embed.
double question_evidence(const std::string& question, const std::vector<corpus::Chunk>& chunks,
                         const embedding::ProjectionModel& model);

// Asks the backend ("route", expects IN or OUT). Any other answer or a
// backend failure falls back to evidence >= theta. Throws EmptyQuestion,
// EmptyPaper (no chunks).
RoutedQuestion route_question(const std::string& question, const corpus::PaperDocument& paper,
                              const std::vector<corpus::Chunk>& chunks, const embedding::ProjectionModel& model,
                              llm::Backend& backend, const llm::PromptLibrary& prompts,
                              double theta = kDefaultTheta);

struct Answer {
  std::string text;
  std::vector<std::string> cited_chunk_ids;
  std::vector<std::string> retrieved_chunk_ids;
  Route route = Route::kInPaper;
  bool degraded = false;
};

nlohmann::ordered_json to_json(const Answer& a);

inline constexpr const char* kInsufficientContext = "insufficient context";

// [Sn] markers, 1-based, mapped onto `retrieved`; out-of-range markers are
// dropped and repeats collapse to the first mention.
std::vector<std::string> cited_segments(const std::string& text, const std::vector<std::string>& retrieved);

struct ReadingDeps {
  const kb::KnowledgeBase& kb;
  llm::Backend& backend;
  const llm::PromptLibrary& prompts;
  const query::Registry& plugins;
};

// In-paper questions retrieve from this paper only; out-of-paper questions go
// to the local-index plugin with the question's keywords and never use this
// paper's own chunks. `on_delta`, when set, receives the streamed answer.
// Throws BackendFailure-class errors and PluginFailure.
Answer answer_question(const RoutedQuestion& rq, const corpus::PaperDocument& paper, const ReadingDeps& deps,
                       std::size_t k = kDefaultSegments, const llm::DeltaSink* on_delta = nullptr);

struct PaperSummary {
  std::string doc_id;
  std::string title;
  std::string abstract;
  std::vector<std::string> contributions;
  std::string approach;
  std::vector<std::string> advantages;
};

struct ComparisonReport {
  std::vector<PaperSummary> per_paper;  // input order; table rows follow it
  std::vector<std::string> similarities;
  std::vector<std::string> differences;
};

nlohmann::ordered_json to_json(const ComparisonReport& r);
std::string to_markdown(const ComparisonReport& r);

// Lines starting with `prefix` (after trimming), with the prefix removed.
std::vector<std::string> prefixed_lines(const std::string& text, std::string_view prefix);

// Abstract, or the first 150 tokens of the first non-empty section body.
std::string abstract_or_lead(const corpus::PaperDocument& doc);

// Throws CountOutOfRange (limit 2 or 5), DuplicateDocId, UnknownDocId before
// any backend call.
ComparisonReport compare_papers(const std::vector<std::string>& doc_ids, const kb::KnowledgeBase& kb,
                                llm::Backend& backend, const llm::PromptLibrary& prompts);

}  // namespace litpilot::reading
