#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace litpilot::corpus {

inline constexpr int kMaxSectionDepth = 6;

struct Section {
  std::string heading;
  int depth = 1;
  std::string body;
  std::vector<Section> children;

  bool operator==(const Section&) const = default;
};

enum class Language { kZh, kEn, kMixed };

std::string_view to_string(Language lang);
Language language_from_string(std::string_view tag);

struct PaperDocument {
  std::string doc_id;
  std::string title;
  std::vector<std::string> authors;
  std::vector<std::string> institutions;
  std::optional<std::string> venue;
  std::optional<int> year;
  Language language = Language::kEn;
  std::string abstract;
  // Research-area tags from the header block; they feed index metadata.
  std::vector<std::string> domains;
  std::vector<Section> sections;
  std::vector<std::string> references;
  std::string source_uri;

  bool operator==(const PaperDocument&) const = default;
};

enum class SourceFormat { kMarkdown, kPlain };

SourceFormat format_from_string(std::string_view tag);

// Parses pre-extracted paper text into a PaperDocument.
//
// An optional leading "Key: Value" block (Title, Authors, Institutions,
// Venue, Year, Language, Domains, Source) supplies metadata; it ends at the
// first blank line. Headings are "#"-runs for markdown and numbered
// ("1.", "2.1") or short ALL-CAPS lines for plain text. Text before the
// first heading becomes the abstract when it is labeled "Abstract", and a
// depth-1 "Front Matter" section otherwise. Headings named Abstract or
// References are folded into the corresponding fields.
//
// Throws EmptyDocument and MalformedHeader.
PaperDocument parse_document(std::string_view source, SourceFormat format,
                             std::string source_uri = {});

// doc_id = first 16 hex chars of SHA-256 over the title and the section
// bodies in pre-order, newline-separated.
std::string compute_doc_id(const PaperDocument& doc);

// Checks the section-tree and metadata invariants; throws InvalidDocument.
void validate(const PaperDocument& doc);

// Markdown-like rendering that parse_document reads back to an equal document.
std::string to_markdown(const PaperDocument& doc);

nlohmann::ordered_json to_json(const PaperDocument& doc);
PaperDocument document_from_json(const nlohmann::json& j);

// Pre-order walk helper: visits every section with its heading path.
template <typename Fn>
void for_each_section(const std::vector<Section>& sections, Fn&& fn,
                      std::vector<std::string>& path) {
  for (const auto& s : sections) {
    path.push_back(s.heading);
    fn(s, static_cast<const std::vector<std::string>&>(path));
    for_each_section(s.children, fn, path);
    path.pop_back();
  }
}

template <typename Fn>
void for_each_section(const std::vector<Section>& sections, Fn&& fn) {
  std::vector<std::string> path;
  for_each_section(sections, fn, path);
}

}  // namespace litpilot::corpus
