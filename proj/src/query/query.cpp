#include "litpilot/query/query.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <regex>
#include <set>
#include <sstream>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::query {
namespace {

constexpr int kMinYear = 1900;
constexpr int kMaxYear = 2100;

bool valid_year(int y) { return y >= kMinYear && y <= kMaxYear; }

struct Span {
  std::size_t begin;
  std::size_t end;
};

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (std::size_t pos = 0; pos < s.size();) {
    const auto d = utf8::decode_at(s, pos);
    if (utf8::is_space(d.cp)) {
      space = true;
    } else {
      if (space && !out.empty()) out += ' ';
      space = false;
      out.append(s.substr(pos, d.len));
    }
    pos += d.len;
  }
  return out;
}

EntityType type_from_string(const std::string& s) {
  if (s == "scholar") return EntityType::kScholar;
  if (s == "institution") return EntityType::kInstitution;
  if (s == "domain") return EntityType::kDomain;
  throw invalid_input("InvalidGazetteer", "unknown entity type '" + s + "'");
}

std::string strip_quotes(std::string_view s) {
  static const std::vector<std::pair<std::string_view, std::string_view>> kPairs = {
      {"\"", "\""}, {"'", "'"}, {"`", "`"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"\xE3\x80\x8C", "\xE3\x80\x8D"}};
  s = utf8::trim(s);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [open, close] : kPairs) {
      if (s.size() >= open.size() + close.size() && s.substr(0, open.size()) == open &&
          s.substr(s.size() - close.size()) == close) {
        s = utf8::trim(s.substr(open.size(), s.size() - open.size() - close.size()));
        changed = true;
      }
    }
  }
  return std::string(s);
}

}  // namespace

bool StructuredQuery::empty() const {
  return scholars.empty() && institutions.empty() && years.empty() && year_ranges.empty() && domains.empty() &&
         keywords.empty() && free_text.empty();
}

std::optional<YearRange> StructuredQuery::year_bounds() const {
  if (years.empty() && year_ranges.empty()) return std::nullopt;
  YearRange out;
  bool open_min = false, open_max = false;
  const auto widen = [&](std::optional<int> lo, std::optional<int> hi) {
    if (!lo) open_min = true;
    else out.min = out.min ? std::min(*out.min, *lo) : *lo;
    if (!hi) open_max = true;
    else out.max = out.max ? std::max(*out.max, *hi) : *hi;
  };
  for (int y : years) widen(y, y);
  for (const auto& r : year_ranges) widen(r.min, r.max);
  if (open_min) out.min.reset();
  if (open_max) out.max.reset();
  return out;
}

nlohmann::ordered_json to_json(const StructuredQuery& q) {
  nlohmann::ordered_json j;
  j["scholars"] = q.scholars;
  j["institutions"] = q.institutions;
  j["years"] = q.years;
  j["year_ranges"] = nlohmann::ordered_json::array();
  for (const auto& r : q.year_ranges) {
    j["year_ranges"].push_back({{"min", r.min ? nlohmann::ordered_json(*r.min) : nlohmann::ordered_json(nullptr)},
                                {"max", r.max ? nlohmann::ordered_json(*r.max) : nlohmann::ordered_json(nullptr)}});
  }
  j["domains"] = q.domains;
  j["keywords"] = q.keywords;
  j["free_text"] = q.free_text;
  return j;
}

void Gazetteer::add(EntityType type, std::string phrase) {
  phrase = collapse_spaces(phrase);
  if (phrase.empty()) throw invalid_input("InvalidGazetteer", "empty phrase");
  auto lowered = utf8::ascii_lower(phrase);
  for (const auto& e : entries_) {
    if (e.lowered == lowered) throw invalid_input("InvalidGazetteer", "duplicate phrase '" + phrase + "'");
  }
  entries_.push_back({type, std::move(phrase), std::move(lowered)});
}

Gazetteer Gazetteer::parse(std::string_view tsv) {
  Gazetteer g;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::trim(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw invalid_input("InvalidGazetteer", "line " + std::to_string(lineno) + ": expected type<TAB>phrase");
    }
    g.add(type_from_string(std::string(utf8::trim(line.substr(0, tab)))), line.substr(tab + 1));
  }
  return g;
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open gazetteer " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string rewrite_query(std::string_view user_query, llm::Backend& backend, const llm::PromptLibrary& prompts,
                          bool* used_fallback) {
  const std::string trimmed(utf8::trim(user_query));
  if (trimmed.empty()) throw invalid_input("EmptyQuery", "query is empty");
  std::string rewritten;
  try {
    rewritten = strip_quotes(llm::ask(backend, prompts.render("query_rewrite", {{"query", trimmed}}), 128));
  } catch (const std::exception& e) {
    if (!llm::is_backend_failure(e)) throw;
    rewritten.clear();
  }
  if (used_fallback) *used_fallback = rewritten.empty();
  if (!rewritten.empty()) return rewritten;
  auto cleaned = corpus::clean_text(trimmed);
  return cleaned.empty() ? trimmed : cleaned;
}

StructuredQuery extract_entities(std::string_view query, const Gazetteer& gaz) {
  if (utf8::trim(query).empty()) throw invalid_input("EmptyQuery", "query is empty");
  const std::string text = utf8::sanitize(query);
  const std::string lowered = utf8::ascii_lower(text);

  std::vector<const Gazetteer::Entry*> phrases;
  for (const auto& e : gaz.entries()) phrases.push_back(&e);
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const auto* a, const auto* b) { return a->lowered.size() > b->lowered.size(); });

  StructuredQuery q;
  std::vector<Span> removed;
  const auto push_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };

  // Gazetteer phrases.
  for (std::size_t pos = 0; pos < text.size();) {
    const Gazetteer::Entry* hit = nullptr;
    for (const auto* p : phrases) {
      if (lowered.compare(pos, p->lowered.size(), p->lowered) == 0 &&
          utf8::at_word_boundaries(text, pos, pos + p->lowered.size())) {
        hit = p;
        break;
      }
    }
    if (!hit) {
      pos += utf8::decode_at(text, pos).len;
      continue;
    }
    switch (hit->type) {
      case EntityType::kScholar: push_unique(q.scholars, hit->phrase); break;
      case EntityType::kInstitution: push_unique(q.institutions, hit->phrase); break;
      case EntityType::kDomain: push_unique(q.domains, hit->phrase); break;
    }
    removed.push_back({pos, pos + hit->lowered.size()});
    pos += hit->lowered.size();
  }

  // Unmatched stretches between entity spans.
  std::vector<Span> rest;
  std::size_t cursor = 0;
  for (const auto& s : removed) {
    if (s.begin > cursor) rest.push_back({cursor, s.begin});
    cursor = s.end;
  }
  if (cursor < text.size()) rest.push_back({cursor, text.size()});

  // Years and year ranges.
  static const std::regex kYears(R"(\b(?:([Ss][Ii][Nn][Cc][Ee])\s+(\d{4})|(\d{4})\s*(?:-|\xE2\x80\x93|~|to)\s*(\d{4})|(\d{4}))\b)");
  std::vector<Span> word_rest;
  for (const auto& seg : rest) {
    const std::string part = text.substr(seg.begin, seg.end - seg.begin);
    std::size_t kept = 0;
    for (auto it = std::sregex_iterator(part.begin(), part.end(), kYears); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      bool consumed = false;
      if (m[2].matched) {
        const int y = std::stoi(m[2].str());
        if (valid_year(y)) {
          q.year_ranges.push_back({y, std::nullopt});
          consumed = true;
        }
      } else if (m[3].matched) {
        const int a = std::stoi(m[3].str());
        const int b = std::stoi(m[4].str());
        if (valid_year(a) && valid_year(b) && a <= b) {
          q.year_ranges.push_back({a, b});
          consumed = true;
        }
      } else {
        const int y = std::stoi(m[5].str());
        if (valid_year(y)) {
          if (std::find(q.years.begin(), q.years.end(), y) == q.years.end()) q.years.push_back(y);
          consumed = true;
        }
      }
      if (!consumed) continue;
      const auto b = static_cast<std::size_t>(m.position(0));
      if (b > kept) word_rest.push_back({seg.begin + kept, seg.begin + b});
      removed.push_back({seg.begin + b, seg.begin + b + static_cast<std::size_t>(m.length(0))});
      kept = b + static_cast<std::size_t>(m.length(0));
    }
    if (kept < part.size()) word_rest.push_back({seg.begin + kept, seg.end});
  }

  // Keywords and free text from whatever is left.
  std::string residual;
  for (const auto& seg : word_rest) {
    const std::string_view part(text.data() + seg.begin, seg.end - seg.begin);
    for (const auto& t : corpus::terms(part)) {
      if (!corpus::is_stopword(t)) push_unique(q.keywords, t);
    }
    if (!residual.empty()) residual += ' ';
    residual.append(part);
  }
  q.free_text = collapse_spaces(residual);
  return q;
}

std::string search_text(const StructuredQuery& q) {
  std::string out;
  for (const auto* list : {&q.domains, &q.keywords}) {
    for (const auto& s : *list) {
      if (!out.empty()) out += ' ';
      out += s;
    }
  }
  return out.empty() ? q.free_text : out;
}

std::map<std::string, PluginResult> dispatch(const StructuredQuery& q, const Registry& registry, std::size_t k) {
  if (k == 0) throw invalid_input("InvalidK", "k must be at least 1");
  std::vector<std::string> routed;
  if (!q.scholars.empty() || !q.institutions.empty()) routed.push_back(kScholarPlugin);
  if (!q.domains.empty() || !q.keywords.empty() || !q.free_text.empty()) routed.push_back(kLocalPlugin);

  std::map<std::string, std::future<std::vector<retrieval::SearchHit>>> running;
  for (const auto& name : routed) {
    const auto it = registry.find(name);
    if (it == registry.end() || !it->second) continue;
    auto plugin = it->second;
    running.emplace(name, std::async(std::launch::async, [plugin, &q, k] { return plugin->execute(q, k); }));
  }
  if (running.empty()) {
    std::string wanted;
    for (const auto& r : routed) wanted += (wanted.empty() ? "" : ", ") + r;
    throw not_found("NoPluginMatched", "no registered plugin for this query (routed to: " +
                                           (wanted.empty() ? std::string("none") : wanted) + ")");
  }
  std::map<std::string, PluginResult> out;
  for (auto& [name, fut] : running) {
    PluginResult r;
    try {
      r.hits = fut.get();
    } catch (const Error& e) {
      r.error = e.what();
    } catch (const std::exception& e) {
      r.error = std::string("PluginFailure: ") + e.what();
    }
    out.emplace(name, std::move(r));
  }
  return out;
}

}  // namespace litpilot::query
