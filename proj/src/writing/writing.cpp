#include "litpilot/writing/writing.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "litpilot/error.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::writing {
namespace {

std::string lowered_key(const TermEntry& e) { return utf8::ascii_lower(e.source_term); }

// Preference among entries sharing a source term.
int rank(const TermEntry& e, const std::optional<std::string>& domain) {
  if (domain && e.domain_tag == domain) return 0;
  if (!e.domain_tag) return 1;
  return 2;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return out;
}

struct EditLine {
  std::string original;
  std::string replacement;
  std::string rationale;
};

std::optional<EditLine> parse_edit(std::string_view body) {
  const auto arrow = body.find("=>");
  if (arrow == std::string_view::npos) return std::nullopt;
  EditLine e;
  e.original = std::string(utf8::trim(body.substr(0, arrow)));
  std::string_view rest = body.substr(arrow + 2);
  // The rationale follows the last "//" that starts a word.
  std::size_t cut = std::string_view::npos;
  for (auto p = rest.find("//"); p != std::string_view::npos; p = rest.find("//", p + 1)) {
    if (p == 0 || rest[p - 1] == ' ' || rest[p - 1] == '\t') cut = p;
  }
  if (cut != std::string_view::npos) {
    e.rationale = std::string(utf8::trim(rest.substr(cut + 2)));
    rest = rest.substr(0, cut);
  }
  e.replacement = std::string(utf8::trim(rest));
  if (e.original.empty()) return std::nullopt;
  return e;
}

}  // namespace

nlohmann::ordered_json to_json(const TermEntry& t) {
  nlohmann::ordered_json j;
  j["source_term"] = t.source_term;
  j["target_term"] = t.target_term;
  j["domain_tag"] = t.domain_tag ? nlohmann::ordered_json(*t.domain_tag) : nlohmann::ordered_json(nullptr);
  return j;
}

Lexicon::Lexicon(std::vector<TermEntry> entries) : entries_(std::move(entries)) {
  std::set<std::pair<std::string, std::string>> seen;
  for (auto& e : entries_) {
    e.source_term = std::string(utf8::trim(e.source_term));
    e.target_term = std::string(utf8::trim(e.target_term));
    if (e.domain_tag) {
      e.domain_tag = std::string(utf8::trim(*e.domain_tag));
      if (e.domain_tag->empty()) e.domain_tag.reset();
    }
    if (e.source_term.empty() || e.target_term.empty()) {
      throw invalid_input("InvalidLexicon", "empty term in entry '" + e.source_term + "' => '" + e.target_term + "'");
    }
    if (!seen.emplace(lowered_key(e), e.domain_tag.value_or("")).second) {
      throw invalid_input("InvalidLexicon", "duplicate entry for '" + e.source_term + "'" +
                                                (e.domain_tag ? " in domain " + *e.domain_tag : std::string()));
    }
  }
}

Lexicon Lexicon::parse(std::string_view tsv) {
  std::vector<TermEntry> entries;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::trim(line).empty() || line[0] == '#') continue;
    const auto cols = split_tabs(line);
    if (cols.size() < 2 || cols.size() > 3) {
      throw invalid_input("InvalidLexicon", "line " + std::to_string(lineno) + ": expected 2 or 3 columns");
    }
    TermEntry e{cols[0], cols[1], std::nullopt};
    if (cols.size() == 3) e.domain_tag = cols[2];
    entries.push_back(std::move(e));
  }
  return Lexicon(std::move(entries));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open lexicon " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<TermEntry> detect_terms(std::string_view source, const Lexicon& lexicon,
                                    const std::optional<std::string>& domain) {
  // One entry per lowered source term after the domain filter.
  std::map<std::string, const TermEntry*> chosen;
  for (const auto& e : lexicon.entries()) {
    if (domain && e.domain_tag && *e.domain_tag != *domain) continue;
    auto& slot = chosen[lowered_key(e)];
    if (!slot) {
      slot = &e;
      continue;
    }
    const int a = rank(e, domain), b = rank(*slot, domain);
    if (a < b || (a == b && e.domain_tag.value_or("") < slot->domain_tag.value_or(""))) slot = &e;
  }
  std::vector<std::pair<std::string, const TermEntry*>> by_length(chosen.begin(), chosen.end());
  std::stable_sort(by_length.begin(), by_length.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  const std::string text = utf8::sanitize(source);
  const std::string lowered = utf8::ascii_lower(text);
  std::vector<TermEntry> out;
  std::set<const TermEntry*> reported;
  for (std::size_t pos = 0; pos < text.size();) {
    const TermEntry* hit = nullptr;
    std::size_t len = 0;
    for (const auto& [key, entry] : by_length) {
      if (lowered.compare(pos, key.size(), key) == 0 && utf8::at_word_boundaries(text, pos, pos + key.size())) {
        hit = entry;
        len = key.size();
        break;
      }
    }
    if (!hit) {
      pos += utf8::decode_at(text, pos).len;
      continue;
    }
    if (reported.insert(hit).second) out.push_back(*hit);
    pos += len;
  }
  return out;
}

Direction direction_from_string(std::string_view s) {
  const auto t = utf8::ascii_lower(utf8::trim(s));
  for (const char* v : {"en-zh", "en\xE2\x86\x92zh", "en2zh", "en_zh", "en->zh"}) {
    if (t == v) return Direction::kEnToZh;
  }
  for (const char* v : {"zh-en", "zh\xE2\x86\x92" "en", "zh2en", "zh_en", "zh->en"}) {
    if (t == v) return Direction::kZhToEn;
  }
  throw invalid_input("InvalidDirection", "unknown translation direction '" + std::string(s) + "'");
}

std::string_view to_string(Direction d) { return d == Direction::kEnToZh ? "en-zh" : "zh-en"; }

std::string term_lines(const std::vector<TermEntry>& terms) {
  std::string out;
  for (const auto& t : terms) out += "TERM: " + t.source_term + " => " + t.target_term + "\n";
  return out;
}

nlohmann::ordered_json to_json(const TranslationResult& r) {
  nlohmann::ordered_json j;
  j["translated"] = r.translated;
  j["injected_terms"] = nlohmann::ordered_json::array();
  for (const auto& t : r.injected_terms) j["injected_terms"].push_back(to_json(t));
  j["prompt_used"] = r.prompt_used;
  return j;
}

TranslationResult translate(std::string_view source, Direction direction, const Lexicon& lexicon,
                            llm::Backend& backend, const llm::PromptLibrary& prompts,
                            const std::optional<std::string>& domain) {
  if (utf8::trim(source).empty()) throw invalid_input("EmptySource", "nothing to translate");
  TranslationResult r;
  r.injected_terms = detect_terms(source, lexicon, domain);
  const std::string direction_text =
      direction == Direction::kEnToZh ? "English to Chinese" : "Chinese to English";
  r.prompt_used = prompts.render(
      "translate", {{"direction", direction_text}, {"terms", term_lines(r.injected_terms)}, {"source", std::string(source)}});
  r.translated = llm::ask(backend, r.prompt_used, 2048);
  return r;
}

Style style_from_string(std::string_view s) {
  const auto t = utf8::ascii_lower(utf8::trim(s));
  if (t == "academic") return Style::kAcademic;
  if (t == "concise") return Style::kConcise;
  throw invalid_input("InvalidStyle", "style must be academic or concise, got '" + std::string(s) + "'");
}

std::string_view to_string(Style s) { return s == Style::kAcademic ? "academic" : "concise"; }

std::string apply_edits(std::string_view original, const std::vector<Edit>& edits) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& e : edits) {
    out.append(original.substr(pos, e.start - pos));
    out += e.replacement;
    pos = e.end;
  }
  out.append(original.substr(pos));
  return out;
}

nlohmann::ordered_json to_json(const PolishResult& r) {
  nlohmann::ordered_json j;
  j["polished"] = r.polished;
  j["edits"] = nlohmann::ordered_json::array();
  for (const auto& e : r.edits) {
    j["edits"].push_back({{"start", e.start},
                          {"end", e.end},
                          {"original", e.original},
                          {"replacement", e.replacement},
                          {"rationale", e.rationale}});
  }
  j["violations"] = r.violations;
  return j;
}

PolishResult parse_polish_output(std::string_view draft, std::string_view output) {
  PolishResult r;
  std::vector<EditLine> lines;
  std::optional<std::string> final_text;
  std::size_t pos = 0;
  while (pos < output.size()) {
    auto nl = output.find('\n', pos);
    if (nl == std::string_view::npos) nl = output.size();
    const auto line = output.substr(pos, nl - pos);
    const auto t = utf8::trim(line);
    if (t.substr(0, 6) == "FINAL:") {
      const auto head = utf8::trim(t.substr(6));
      const auto tail = nl < output.size() ? output.substr(nl + 1) : std::string_view{};
      std::string text(head);
      if (!head.empty() && !tail.empty()) text += '\n';
      text.append(tail);
      final_text = text;
      break;
    }
    if (t.substr(0, 5) == "EDIT:") {
      if (auto e = parse_edit(t.substr(5))) {
        lines.push_back(std::move(*e));
      } else {
        ++r.violations;
      }
    }
    pos = nl + 1;
  }
  if (!final_text) throw invalid_input("UnparseableOutput", "no FINAL: marker in the backend output");

  for (const auto& l : lines) {
    std::optional<std::size_t> at;
    for (auto p = draft.find(l.original); p != std::string_view::npos; p = draft.find(l.original, p + 1)) {
      const auto end = p + l.original.size();
      const bool overlaps = std::any_of(r.edits.begin(), r.edits.end(),
                                        [&](const Edit& e) { return p < e.end && e.start < end; });
      if (!overlaps) {
        at = p;
        break;
      }
    }
    if (!at) {
      ++r.violations;
      continue;
    }
    r.edits.push_back({*at, *at + l.original.size(), l.original, l.replacement, l.rationale});
  }
  std::sort(r.edits.begin(), r.edits.end(), [](const Edit& a, const Edit& b) { return a.start < b.start; });

  const auto applied = apply_edits(draft, r.edits);
  if (utf8::trim(applied) != utf8::trim(*final_text)) {
    throw invalid_input("UnparseableOutput", "EDIT lines do not reproduce the FINAL text");
  }
  // Surrounding whitespace follows the draft so the edits reproduce it exactly.
  r.polished = applied;
  return r;
}

PolishResult polish(std::string_view draft, Style style, llm::Backend& backend, const llm::PromptLibrary& prompts) {
  if (utf8::trim(draft).empty()) throw invalid_input("EmptyDraft", "nothing to polish");
  const auto prompt =
      prompts.render("polish", {{"style", std::string(to_string(style))}, {"draft", std::string(draft)}});
  return parse_polish_output(draft, llm::ask(backend, prompt, 2048));
}

}  // namespace litpilot::writing
