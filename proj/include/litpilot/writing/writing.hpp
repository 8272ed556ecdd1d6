#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "litpilot/llm/backend.hpp"
#include "litpilot/llm/prompt.hpp"

namespace litpilot::writing {

struct TermEntry {
  std::string source_term;
  std::string target_term;
  std::optional<std::string> domain_tag;

  bool operator==(const TermEntry&) const = default;
};

nlohmann::ordered_json to_json(const TermEntry& t);

// Validated term list: both terms non-empty, (source_term, domain_tag)
// unique with source terms compared case-insensitively.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::vector<TermEntry> entries);  // throws InvalidLexicon

  // UTF-8 TSV: source, target, optional domain tag. '#' lines are comments.
  static Lexicon parse(std::string_view tsv);
  static Lexicon load(const std::filesystem::path& path);

  const std::vector<TermEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<TermEntry> entries_;
};

// Leftmost, longest, non-overlapping, case-insensitive scan for source terms.
// Latin terms only match at word boundaries. With a domain, entries tagged
// with another domain are skipped. When several entries share a source term
// the one tagged with the requested domain wins, then the untagged one, then
// the smallest tag. Each entry is reported once, in first-occurrence order.
std::vector<TermEntry> detect_terms(std::string_view source, const Lexicon& lexicon,
                                    const std::optional<std::string>& domain = std::nullopt);

enum class Direction { kEnToZh, kZhToEn };

// Accepts "en-zh", "en→zh", "en2zh" and the reverse forms. Throws InvalidDirection.
Direction direction_from_string(std::string_view s);
std::string_view to_string(Direction d);  // "en-zh" / "zh-en"

struct TranslationResult {
  std::string translated;
  std::vector<TermEntry> injected_terms;
  std::string prompt_used;
};

nlohmann::ordered_json to_json(const TranslationResult& r);

// "TERM: source => target" lines for the "translate" template.
std::string term_lines(const std::vector<TermEntry>& terms);

// Throws EmptySource; backend errors propagate.
TranslationResult translate(std::string_view source, Direction direction, const Lexicon& lexicon,
                            llm::Backend& backend, const llm::PromptLibrary& prompts,
                            const std::optional<std::string>& domain = std::nullopt);

enum class Style { kAcademic, kConcise };

Style style_from_string(std::string_view s);  // throws InvalidStyle
std::string_view to_string(Style s);

struct Edit {
  std::size_t start = 0;  // byte span in the draft
  std::size_t end = 0;
  std::string original;
  std::string replacement;
  std::string rationale;

  bool operator==(const Edit&) const = default;
};

struct PolishResult {
  std::string polished;
  std::vector<Edit> edits;  // sorted by start, non-overlapping
  std::size_t violations = 0;  // EDIT lines that could not be located
};

nlohmann::ordered_json to_json(const PolishResult& r);

// Applies sorted, non-overlapping edits to `original`.
std::string apply_edits(std::string_view original, const std::vector<Edit>& edits);

// Parses the EDIT/FINAL protocol against the draft. Each original is placed at
// its leftmost occurrence that does not overlap an earlier edit. Throws
// UnparseableOutput when FINAL is missing or the located edits do not turn the
// draft into the FINAL text.
PolishResult parse_polish_output(std::string_view draft, std::string_view output);

// Throws EmptyDraft, UnparseableOutput; backend errors propagate.
PolishResult polish(std::string_view draft, Style style, llm::Backend& backend, const llm::PromptLibrary& prompts);

}  // namespace litpilot::writing
