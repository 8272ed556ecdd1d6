#include "litpilot/corpus/document.hpp"

#include <algorithm>
#include <charconv>
#include <regex>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/util/hash.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::corpus {
namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      start = i + 1;
    }
  }
  return lines;
}

bool is_blank(std::string_view line) { return utf8::trim(line).empty(); }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_list(std::string_view value) {
  const char sep = value.find(';') != std::string_view::npos ? ';' : ',';
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= value.size(); ++i) {
    if (i == value.size() || value[i] == sep) {
      auto item = utf8::trim(value.substr(start, i - start));
      if (!item.empty()) out.emplace_back(item);
      start = i + 1;
    }
  }
  return out;
}

struct Heading {
  int level = 0;
  std::string text;
};

std::optional<Heading> markdown_heading(std::string_view line) {
  std::size_t hashes = 0;
  while (hashes < line.size() && line[hashes] == '#') ++hashes;
  if (hashes == 0 || hashes > static_cast<std::size_t>(kMaxSectionDepth)) return std::nullopt;
  if (hashes == line.size() || (line[hashes] != ' ' && line[hashes] != '\t')) return std::nullopt;
  std::string_view text = utf8::trim(line.substr(hashes));
  while (!text.empty() && text.back() == '#') text.remove_suffix(1);
  text = utf8::trim(text);
  if (text.empty()) return std::nullopt;
  return Heading{static_cast<int>(hashes), std::string(text)};
}

std::optional<Heading> plain_heading(std::string_view raw) {
  const std::string_view line = utf8::trim(raw);
  if (line.empty()) return std::nullopt;

  static const std::regex kNumbered(R"(^(\d{1,2}(?:\.\d{1,2})*)\.?[ \t]+(\S.*)$)");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_match(line.begin(), line.end(), m, kNumbered)) {
    const std::string number = m[1].str();
    const std::string text(utf8::trim(m[2].str()));
    const bool sentence_like = text.back() == '.' || text.back() == ',' || text.back() == ';';
    const auto first = utf8::decode_at(text, 0).cp;
    const bool starts_ok = (first >= 'A' && first <= 'Z') || utf8::is_cjk(first);
    if (!sentence_like && starts_ok && utf8::codepoint_count(text) <= 80) {
      const int level = 1 + static_cast<int>(std::count(number.begin(), number.end(), '.'));
      return Heading{std::min(level, kMaxSectionDepth), text};
    }
  }

  // Short ALL-CAPS line.
  if (utf8::codepoint_count(line) > 60 || line.back() == '.') return std::nullopt;
  int upper = 0;
  for (char c : line) {
    if (c >= 'a' && c <= 'z') return std::nullopt;
    if (c >= 'A' && c <= 'Z') ++upper;
  }
  if (upper < 2) return std::nullopt;
  return Heading{1, std::string(line)};
}

bool iequals(std::string_view a, std::string_view b) { return utf8::ascii_lower(a) == utf8::ascii_lower(b); }

bool is_abstract_heading(std::string_view h) { return iequals(h, "abstract") || h == "摘要"; }

bool is_references_heading(std::string_view h) {
  return iequals(h, "references") || iequals(h, "bibliography") || h == "参考文献";
}

// "Abstract" label at the start of the preamble; returns the remaining text.
std::optional<std::string_view> strip_abstract_label(std::string_view preamble) {
  for (std::string_view label : {std::string_view("abstract"), std::string_view("摘要")}) {
    if (preamble.size() < label.size()) continue;
    if (utf8::ascii_lower(preamble.substr(0, label.size())) != label) continue;
    std::string_view rest = preamble.substr(label.size());
    if (rest.empty()) return rest;
    const char next = rest.front();
    if (next == ':' || next == '.' || next == ' ' || next == '\t' || next == '\n') {
      if (next == ':' || next == '.') rest.remove_prefix(1);
      return utf8::trim(rest);
    }
    if (rest.substr(0, 3) == "：") return utf8::trim(rest.substr(3));
  }
  return std::nullopt;
}

const std::vector<std::string_view>& header_keys() {
  static const std::vector<std::string_view> kKeys = {"title",     "authors", "institutions",
                                                      "venue",     "year",    "language",
                                                      "domains",   "source"};
  return kKeys;
}

struct HeaderLine {
  std::string key;  // lowercased
  std::string value;
};

std::optional<HeaderLine> header_line(std::string_view line) {
  const auto colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 32) return std::nullopt;
  const std::string_view key = line.substr(0, colon);
  for (char c : key) {
    if (!utf8::is_ascii_alpha(static_cast<unsigned char>(c)) && c != ' ' && c != '_') return std::nullopt;
  }
  return HeaderLine{utf8::ascii_lower(utf8::trim(key)), std::string(utf8::trim(line.substr(colon + 1)))};
}

bool is_known_key(std::string_view key) {
  const auto& keys = header_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

Language detect_language(const PaperDocument& doc) {
  std::size_t cjk = 0;
  std::size_t latin = 0;
  const auto count = [&](std::string_view text) {
    for (std::size_t pos = 0; pos < text.size();) {
      const auto d = utf8::decode_at(text, pos);
      if (utf8::is_cjk(d.cp)) ++cjk;
      else if (utf8::is_latin_letter(d.cp)) ++latin;
      pos += d.len;
    }
  };
  count(doc.title);
  count(doc.abstract);
  for_each_section(doc.sections, [&](const Section& s, const auto&) { count(s.body); });
  if (cjk + latin == 0) return Language::kEn;
  const double ratio = static_cast<double>(cjk) / static_cast<double>(cjk + latin);
  if (ratio >= 0.8) return Language::kZh;
  if (ratio <= 0.2) return Language::kEn;
  return Language::kMixed;
}

// Appends `section` at `depth`, descending the chain of last children.
void append_at_depth(std::vector<Section>& roots, Section section) {
  std::vector<Section>* level = &roots;
  for (int d = 1; d < section.depth; ++d) level = &level->back().children;
  level->push_back(std::move(section));
}

Section* last_at_depth(std::vector<Section>& roots, int depth) {
  std::vector<Section>* level = &roots;
  Section* node = nullptr;
  for (int d = 1; d <= depth; ++d) {
    if (level->empty()) return node;
    node = &level->back();
    level = &node->children;
  }
  return node;
}

int chain_depth(const std::vector<Section>& roots) {
  int depth = 0;
  const std::vector<Section>* level = &roots;
  while (!level->empty()) {
    ++depth;
    level = &level->back().children;
  }
  return depth;
}

void validate_sections(const std::vector<Section>& sections, int expected_depth) {
  for (const auto& s : sections) {
    if (utf8::trim(s.heading).empty()) throw invalid_input("InvalidDocument", "empty section heading");
    if (s.depth != expected_depth) {
      throw invalid_input("InvalidDocument", "section '" + s.heading + "' has depth " +
                                                 std::to_string(s.depth) + ", expected " +
                                                 std::to_string(expected_depth));
    }
    if (s.depth > kMaxSectionDepth) throw invalid_input("InvalidDocument", "section tree deeper than 6");
    validate_sections(s.children, expected_depth + 1);
  }
}

nlohmann::ordered_json section_to_json(const Section& s) {
  nlohmann::ordered_json j;
  j["heading"] = s.heading;
  j["depth"] = s.depth;
  j["body"] = s.body;
  j["children"] = nlohmann::ordered_json::array();
  for (const auto& c : s.children) j["children"].push_back(section_to_json(c));
  return j;
}

Section section_from_json(const nlohmann::json& j) {
  Section s;
  s.heading = j.at("heading").get<std::string>();
  s.depth = j.at("depth").get<int>();
  s.body = j.value("body", "");
  for (const auto& c : j.value("children", nlohmann::json::array())) s.children.push_back(section_from_json(c));
  return s;
}

}  // namespace

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::kZh:
      return "zh";
    case Language::kEn:
      return "en";
    case Language::kMixed:
      return "mixed";
  }
  return "en";
}

Language language_from_string(std::string_view tag) {
  const std::string t = utf8::ascii_lower(utf8::trim(tag));
  if (t == "zh") return Language::kZh;
  if (t == "en") return Language::kEn;
  if (t == "mixed") return Language::kMixed;
  throw invalid_input("InvalidLanguage", "unknown language tag '" + std::string(tag) + "'");
}

SourceFormat format_from_string(std::string_view tag) {
  const std::string t = utf8::ascii_lower(tag);
  if (t == "markdown" || t == "markdown-like" || t == "md") return SourceFormat::kMarkdown;
  if (t == "plain" || t == "text" || t == "txt") return SourceFormat::kPlain;
  throw invalid_input("InvalidFormat", "unknown source format '" + std::string(tag) + "'");
}

PaperDocument parse_document(std::string_view source, SourceFormat format, std::string source_uri) {
  const std::string text = utf8::sanitize(source);
  if (utf8::trim(text).empty()) throw invalid_input("EmptyDocument", "source has no non-whitespace content");

  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && is_blank(lines[i])) ++i;

  const auto heading_of = [format](std::string_view line) {
    return format == SourceFormat::kMarkdown ? markdown_heading(line) : plain_heading(line);
  };

  PaperDocument doc;
  doc.source_uri = std::move(source_uri);
  std::optional<Language> declared_language;

  // Leading metadata block.
  if (i < lines.size()) {
    const auto first = header_line(lines[i]);
    if (first && is_known_key(first->key)) {
      for (; i < lines.size() && !is_blank(lines[i]) && !heading_of(lines[i]); ++i) {
        const auto h = header_line(lines[i]);
        if (!h) {
          throw invalid_input("MalformedHeader",
                              "line " + std::to_string(i + 1) + " is not 'Key: Value': " + std::string(lines[i]));
        }
        if (h->key == "title") {
          if (h->value.empty()) throw invalid_input("MalformedHeader", "empty Title");
          doc.title = h->value;
        } else if (h->key == "authors") {
          doc.authors = split_list(h->value);
        } else if (h->key == "institutions") {
          doc.institutions = split_list(h->value);
        } else if (h->key == "venue") {
          if (!h->value.empty()) doc.venue = h->value;
        } else if (h->key == "year") {
          int year = 0;
          const auto* end = h->value.data() + h->value.size();
          const auto res = std::from_chars(h->value.data(), end, year);
          if (res.ec != std::errc() || res.ptr != end || year < 1900 || year > 2100) {
            throw invalid_input("MalformedHeader", "Year must be an integer in [1900, 2100], got '" + h->value + "'");
          }
          doc.year = year;
        } else if (h->key == "language") {
          try {
            declared_language = language_from_string(h->value);
          } catch (const Error&) {
            throw invalid_input("MalformedHeader", "Language must be zh, en or mixed, got '" + h->value + "'");
          }
        } else if (h->key == "domains") {
          doc.domains = split_list(h->value);
        } else if (h->key == "source") {
          doc.source_uri = h->value;
        }
      }
    }
  }

  enum class Target { kPreamble, kSection, kAbstract, kReferences };
  Target target = Target::kPreamble;
  std::vector<std::string> preamble;
  std::vector<std::string> abstract_lines;
  std::vector<std::string> body;
  std::vector<Section> roots;
  std::optional<std::string> first_heading;

  const auto flush_body = [&] {
    if (target == Target::kSection) {
      Section* open = last_at_depth(roots, chain_depth(roots));
      open->body = std::string(utf8::trim(join(body, "\n")));
    }
    body.clear();
  };

  for (; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (auto h = heading_of(line)) {
      flush_body();
      if (is_abstract_heading(h->text)) {
        target = Target::kAbstract;
      } else if (is_references_heading(h->text)) {
        target = Target::kReferences;
      } else {
        if (!first_heading) first_heading = h->text;
        Section s;
        s.heading = h->text;
        // Skipped levels ("#" then "###") attach one level below the open chain.
        s.depth = std::min(h->level, chain_depth(roots) + 1);
        append_at_depth(roots, std::move(s));
        target = Target::kSection;
      }
      continue;
    }
    switch (target) {
      case Target::kPreamble:
        preamble.emplace_back(line);
        break;
      case Target::kAbstract:
        abstract_lines.emplace_back(line);
        break;
      case Target::kReferences:
        if (!is_blank(line)) doc.references.emplace_back(utf8::trim(line));
        break;
      case Target::kSection:
        body.emplace_back(line);
        break;
    }
  }
  flush_body();

  const std::string pre(utf8::trim(join(preamble, "\n")));
  if (!pre.empty()) {
    if (auto rest = strip_abstract_label(pre)) {
      doc.abstract = std::string(*rest);
    } else {
      Section front;
      front.heading = "Front Matter";
      front.depth = 1;
      front.body = pre;
      roots.insert(roots.begin(), std::move(front));
    }
  }
  if (!abstract_lines.empty()) {
    const std::string a(utf8::trim(join(abstract_lines, "\n")));
    doc.abstract = doc.abstract.empty() ? a : doc.abstract + "\n" + a;
  }
  doc.sections = std::move(roots);

  if (doc.title.empty()) {
    if (first_heading) {
      doc.title = *first_heading;
    } else {
      for (auto l : lines) {
        if (!is_blank(l)) {
          doc.title = std::string(utf8::prefix_codepoints(utf8::trim(l), 200));
          break;
        }
      }
    }
  }
  doc.language = declared_language.value_or(detect_language(doc));
  doc.doc_id = compute_doc_id(doc);
  validate(doc);
  return doc;
}

std::string compute_doc_id(const PaperDocument& doc) {
  std::string data = doc.title;
  for_each_section(doc.sections, [&](const Section& s, const auto&) {
    data += '\n';
    data += s.body;
  });
  return content_id(data);
}

void validate(const PaperDocument& doc) {
  if (utf8::trim(doc.title).empty()) throw invalid_input("InvalidDocument", "title is empty");
  if (doc.year && (*doc.year < 1900 || *doc.year > 2100)) {
    throw invalid_input("InvalidDocument", "year out of [1900, 2100]");
  }
  validate_sections(doc.sections, 1);
}

std::string to_markdown(const PaperDocument& doc) {
  std::string out;
  out += "Title: " + doc.title + "\n";
  if (!doc.authors.empty()) out += "Authors: " + join(doc.authors, "; ") + "\n";
  if (!doc.institutions.empty()) out += "Institutions: " + join(doc.institutions, "; ") + "\n";
  if (doc.venue) out += "Venue: " + *doc.venue + "\n";
  if (doc.year) out += "Year: " + std::to_string(*doc.year) + "\n";
  out += "Language: " + std::string(to_string(doc.language)) + "\n";
  if (!doc.domains.empty()) out += "Domains: " + join(doc.domains, "; ") + "\n";
  if (!doc.source_uri.empty()) out += "Source: " + doc.source_uri + "\n";
  out += "\n";
  if (!doc.abstract.empty()) out += "# Abstract\n" + doc.abstract + "\n\n";
  for_each_section(doc.sections, [&](const Section& s, const auto&) {
    out += std::string(static_cast<std::size_t>(s.depth), '#') + " " + s.heading + "\n";
    if (!s.body.empty()) out += s.body + "\n";
    out += "\n";
  });
  if (!doc.references.empty()) {
    out += "# References\n";
    for (const auto& r : doc.references) out += r + "\n";
  }
  return out;
}

nlohmann::ordered_json to_json(const PaperDocument& doc) {
  nlohmann::ordered_json j;
  j["doc_id"] = doc.doc_id;
  j["title"] = doc.title;
  j["authors"] = doc.authors;
  j["institutions"] = doc.institutions;
  j["venue"] = doc.venue ? nlohmann::ordered_json(*doc.venue) : nlohmann::ordered_json(nullptr);
  j["year"] = doc.year ? nlohmann::ordered_json(*doc.year) : nlohmann::ordered_json(nullptr);
  j["language"] = to_string(doc.language);
  j["abstract"] = doc.abstract;
  j["domains"] = doc.domains;
  j["sections"] = nlohmann::ordered_json::array();
  for (const auto& s : doc.sections) j["sections"].push_back(section_to_json(s));
  j["references"] = doc.references;
  j["source_uri"] = doc.source_uri;
  return j;
}

PaperDocument document_from_json(const nlohmann::json& j) {
  PaperDocument doc;
  try {
    doc.title = j.at("title").get<std::string>();
    doc.authors = j.value("authors", std::vector<std::string>{});
    doc.institutions = j.value("institutions", std::vector<std::string>{});
    if (j.contains("venue") && !j["venue"].is_null()) doc.venue = j["venue"].get<std::string>();
    if (j.contains("year") && !j["year"].is_null()) doc.year = j["year"].get<int>();
    doc.language = language_from_string(j.value("language", "en"));
    doc.abstract = j.value("abstract", "");
    doc.domains = j.value("domains", std::vector<std::string>{});
    for (const auto& s : j.value("sections", nlohmann::json::array())) doc.sections.push_back(section_from_json(s));
    doc.references = j.value("references", std::vector<std::string>{});
    doc.source_uri = j.value("source_uri", "");
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidDocument", e.what());
  }
  doc.doc_id = compute_doc_id(doc);
  if (j.contains("doc_id") && j["doc_id"].get<std::string>() != doc.doc_id) {
    throw invalid_input("InvalidDocument", "doc_id does not match content");
  }
  validate(doc);
  return doc;
}

}  // namespace litpilot::corpus
