#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <regex>
#include <set>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/investigation/investigation.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::investigation {
namespace {

constexpr std::size_t kSummarySnippets = 5;
constexpr std::size_t kReviewAbstractTokens = 120;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::string bullet_lines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += "- " + s + "\n";
  if (!out.empty()) out.pop_back();
  return out;
}

// Splits "PREFIX: value" off the first line that carries it; the remaining
// lines, trimmed, are the body.
std::pair<std::string, std::string> take_prefixed_line(const std::string& text, const std::string& prefix) {
  std::string found, body;
  bool have = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line(text.data() + pos, nl - pos);
    const auto t = utf8::trim(line);
    if (!have && t.substr(0, prefix.size()) == prefix) {
      found = std::string(utf8::trim(t.substr(prefix.size())));
      have = true;
    } else {
      body.append(line);
      body += '\n';
    }
    pos = nl + 1;
  }
  return {found, std::string(utf8::trim(body))};
}

void check_selection(const std::vector<std::string>& doc_ids, const kb::KnowledgeBase& kb) {
  if (doc_ids.empty()) throw invalid_input("EmptyDocList", "no papers selected");
  if (doc_ids.size() > kReviewLimit) {
    throw domain_rule("LimitExceeded",
                      std::to_string(doc_ids.size()) + " papers requested; the limit is " + std::to_string(kReviewLimit),
                      static_cast<long>(kReviewLimit));
  }
  std::set<std::string> seen;
  for (const auto& id : doc_ids) {
    if (!seen.insert(id).second) throw invalid_input("DuplicateDocId", id);
  }
  for (const auto& id : doc_ids) {
    if (!kb.contains(id)) throw not_found("UnknownDocId", id);
  }
}

const std::regex& marker_regex() {
  static const std::regex re(R"(\[(\d+(?:\s*,\s*\d+)*)\])");
  return re;
}

std::vector<std::size_t> numbers_in(const std::string& group) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < group.size()) {
    const auto start = group.find_first_of("0123456789", pos);
    if (start == std::string::npos) break;
    auto end = group.find_first_not_of("0123456789", start);
    if (end == std::string::npos) end = group.size();
    // Absurdly long numbers cannot be ref numbers; keep them out of stoull.
    out.push_back(end - start > 9 ? 0 : std::stoull(group.substr(start, end - start)));
    pos = end;
  }
  return out;
}

// Rewrites markers through `renumber` (0 = drop) and counts dropped numbers.
std::string rewrite_markers(const std::string& text, const std::function<std::size_t(std::size_t)>& renumber,
                            std::size_t& violations) {
  std::string out;
  auto begin = std::sregex_iterator(text.begin(), text.end(), marker_regex());
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position(0));
    out.append(text, last, pos - last);
    std::vector<std::string> kept;
    for (auto n : numbers_in(m[1].str())) {
      const auto r = renumber(n);
      if (r == 0) {
        ++violations;
      } else {
        kept.push_back(std::to_string(r));
      }
    }
    if (kept.empty()) {
      if (!out.empty() && out.back() == ' ') out.pop_back();
    } else {
      out += "[" + join(kept, ", ") + "]";
    }
    last = pos + static_cast<std::size_t>(m.length(0));
  }
  out.append(text, last, std::string::npos);
  return out;
}

std::vector<std::vector<std::string>> ordered_groups(const std::vector<std::string>& ids,
                                                     const ClusterAssignment& ca) {
  std::vector<std::vector<std::string>> groups(ca.k);
  for (const auto& id : ids) groups[ca.labels.at(id)].push_back(id);
  // Larger first; equal sizes keep the order of their first member in `ids`.
  std::stable_sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    const auto pa = std::find(ids.begin(), ids.end(), a.front()) - ids.begin();
    const auto pb = std::find(ids.begin(), ids.end(), b.front()) - ids.begin();
    return pa < pb;
  });
  return groups;
}

nlohmann::ordered_json hit_json(const std::vector<retrieval::SearchHit>& hits) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& h : hits) arr.push_back(retrieval::to_json(h));
  return arr;
}

}  // namespace

nlohmann::ordered_json to_json(const TopicSearchResult& r) {
  nlohmann::ordered_json j;
  j["rewritten_query"] = r.rewritten_query;
  j["rewrite_fallback"] = r.rewrite_fallback;
  j["structured"] = query::to_json(r.structured);
  j["hits"] = hit_json(r.hits);
  j["plugin_errors"] = r.plugin_errors;
  j["stats"] = to_json(r.stats);
  j["summary"] = r.summary;
  j["degraded"] = r.degraded;
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j;
}

TopicSearchResult topic_search(std::string_view user_query, const TopicSearchDeps& deps, std::size_t k) {
  TopicSearchResult r;
  r.rewritten_query = query::rewrite_query(user_query, deps.backend, deps.prompts, &r.rewrite_fallback);
  r.structured = query::extract_entities(r.rewritten_query, deps.gazetteer);
  const auto per_plugin = query::dispatch(r.structured, deps.plugins, k);

  std::map<std::string, retrieval::SearchHit> best;
  for (const auto& [name, res] : per_plugin) {
    if (res.error) r.plugin_errors[name] = *res.error;
    for (const auto& h : res.hits) {
      auto it = best.find(h.doc_id);
      if (it == best.end() || h.score > it->second.score ||
          (h.score == it->second.score && h.chunk_id < it->second.chunk_id)) {
        best[h.doc_id] = h;
      }
    }
  }
  for (auto& [id, h] : best) r.hits.push_back(std::move(h));
  std::sort(r.hits.begin(), r.hits.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });

  std::vector<corpus::PaperDocument> papers;
  for (const auto& h : r.hits) {
    if (deps.kb.contains(h.doc_id)) papers.push_back(deps.kb.document(h.doc_id));
  }
  r.stats = compute_summary_stats(papers, deps.kb.documents());
  if (r.hits.empty()) return r;

  std::vector<std::string> years, keywords, snippets;
  for (const auto& [y, c] : r.stats.year_histogram) years.push_back(std::to_string(y) + ": " + std::to_string(c));
  for (const auto& kw : r.stats.top_keywords) keywords.push_back(kw.term);
  for (std::size_t i = 0; i < r.hits.size() && i < kSummarySnippets; ++i) {
    const auto& h = r.hits[i];
    std::string title = h.doc_id;
    if (deps.kb.contains(h.doc_id)) title = deps.kb.document(h.doc_id).title;
    snippets.push_back("[" + std::to_string(i + 1) + "] " + title + ": " + h.snippet);
  }
  const auto prompt = deps.prompts.render(
      "topic_summary", {{"query", r.rewritten_query},
                        {"paper_count", std::to_string(r.stats.paper_count)},
                        {"years", years.empty() ? "none" : join(years, ", ")},
                        {"trend", fixed(r.stats.trend_slope, 3)},
                        {"keywords", keywords.empty() ? "none" : join(keywords, ", ")},
                        {"snippets", join(snippets, "\n")}});
  try {
    r.summary = std::string(utf8::trim(llm::ask(deps.backend, prompt, 512)));
  } catch (const std::exception& e) {
    if (!llm::is_backend_failure(e)) throw;
    r.summary.clear();
    r.degraded = true;
    r.warning = std::string("summary unavailable: ") + e.what();
  }
  return r;
}

nlohmann::ordered_json to_json(const ScholarSurvey& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : s.groups) j["groups"].push_back({{"label", g.label}, {"doc_ids", g.doc_ids}});
  return j;
}

ScholarSurvey scholar_survey(const std::string& name, const kb::KnowledgeBase& kb, llm::Backend& backend,
                             const llm::PromptLibrary& prompts, std::uint64_t seed) {
  const std::string needle = utf8::ascii_lower(utf8::trim(name));
  if (needle.empty()) throw invalid_input("EmptyName", "scholar name is empty");
  std::map<std::string, embedding::EmbeddingVector> vectors;
  std::map<std::string, std::string> titles;
  std::vector<std::string> ids;
  for (const auto& d : kb.documents()) {
    const bool match = std::any_of(d.authors.begin(), d.authors.end(), [&](const std::string& a) {
      return utf8::ascii_lower(a).find(needle) != std::string::npos;
    });
    if (!match) continue;
    ids.push_back(d.doc_id);
    titles[d.doc_id] = d.title;
    vectors[d.doc_id] = kb.embed(kb::KnowledgeBase::paper_text(d));
  }
  if (ids.empty()) throw not_found("ScholarNotFound", std::string(utf8::trim(name)));

  const std::size_t k = std::min<std::size_t>((ids.size() + 2) / 3, 5);
  const auto ca = cluster_papers(vectors, k, seed);
  ScholarSurvey s;
  s.name = std::string(utf8::trim(name));
  for (auto& members : ordered_groups(ids, ca)) {
    std::vector<std::string> ts;
    for (const auto& id : members) ts.push_back(titles[id]);
    const auto answer = llm::ask(backend, prompts.render("area_label", {{"titles", bullet_lines(ts)}}), 32);
    const auto trimmed = utf8::trim(answer);
    std::string label(utf8::trim(trimmed.substr(0, trimmed.find('\n'))));
    s.groups.push_back({label, std::move(members)});
  }
  return s;
}

std::string citation_string(const corpus::PaperDocument& doc) {
  std::string out = join(doc.authors, ", ");
  if (doc.year) out += (out.empty() ? "(" : " (") + std::to_string(*doc.year) + ")";
  if (!out.empty()) out += ". ";
  out += doc.title + ".";
  if (doc.venue && !doc.venue->empty()) out += " " + *doc.venue + ".";
  return out;
}

std::vector<std::size_t> citation_markers(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), marker_regex()); it != std::sregex_iterator(); ++it) {
    for (auto n : numbers_in((*it)[1].str())) out.push_back(n);
  }
  return out;
}

ReviewOutline generate_review(const std::vector<std::string>& doc_ids, const kb::KnowledgeBase& kb,
                              llm::Backend& backend, const llm::PromptLibrary& prompts, std::uint64_t seed) {
  check_selection(doc_ids, kb);

  std::map<std::string, corpus::PaperDocument> docs;
  std::map<std::string, embedding::EmbeddingVector> vectors;
  for (const auto& id : doc_ids) {
    docs[id] = kb.document(id);
    vectors[id] = kb.embed(kb::KnowledgeBase::paper_text(docs[id]));
  }
  const std::size_t k = std::min<std::size_t>((doc_ids.size() + 4) / 5, 6);
  const auto groups = ordered_groups(doc_ids, cluster_papers(vectors, k, seed));

  // Numbers handed to the backend, in section order.
  std::map<std::size_t, std::string> supplied;
  std::map<std::string, std::size_t> number_of;
  for (const auto& g : groups) {
    for (const auto& id : g) {
      number_of[id] = supplied.size() + 1;
      supplied[supplied.size() + 1] = id;
    }
  }

  ReviewOutline r;
  std::vector<std::string> titles;
  for (const auto& id : doc_ids) titles.push_back(docs[id].title);
  const auto intro = llm::ask(backend, prompts.render("review_intro", {{"titles", bullet_lines(titles)}}), 512);
  std::tie(r.title, r.introduction) = take_prefixed_line(intro, "TITLE:");
  if (r.title.empty()) r.title = "Literature Review";

  std::vector<std::string> headings;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    std::string papers;
    for (const auto& id : groups[gi]) {
      const auto& d = docs[id];
      papers += "[" + std::to_string(number_of[id]) + "] " + d.title;
      if (!d.abstract.empty()) papers += "\nAbstract: " + std::string(corpus::first_tokens(d.abstract, kReviewAbstractTokens));
      papers += "\n";
    }
    papers.pop_back();
    const auto out = llm::ask(backend, prompts.render("review_section", {{"papers", papers}}), 1024);
    ReviewSection sec;
    std::tie(sec.heading, sec.text) = take_prefixed_line(out, "HEADING:");
    if (sec.heading.empty()) sec.heading = "Section " + std::to_string(gi + 1);
    sec.doc_ids = groups[gi];
    headings.push_back(sec.heading);
    r.body_sections.push_back(std::move(sec));
  }
  r.conclusion = std::string(
      utf8::trim(llm::ask(backend, prompts.render("review_conclusion", {{"headings", bullet_lines(headings)}}), 512)));

  // Renumber by first citation; anything that does not name a supplied paper is dropped.
  std::map<std::size_t, std::size_t> renumbered;
  std::vector<std::string> order;
  const auto renumber = [&](std::size_t n) -> std::size_t {
    if (!supplied.count(n)) return 0;
    auto [it, fresh] = renumbered.emplace(n, renumbered.size() + 1);
    if (fresh) order.push_back(supplied[n]);
    return it->second;
  };
  r.introduction = rewrite_markers(r.introduction, renumber, r.citation_violations);
  for (auto& sec : r.body_sections) sec.text = rewrite_markers(sec.text, renumber, r.citation_violations);
  r.conclusion = rewrite_markers(r.conclusion, renumber, r.citation_violations);
  for (const auto& [n, id] : supplied) renumber(n);

  for (std::size_t i = 0; i < order.size(); ++i) {
    r.bibliography.push_back({i + 1, order[i], citation_string(docs[order[i]])});
  }
  return r;
}

nlohmann::ordered_json to_json(const ReviewOutline& r) {
  nlohmann::ordered_json j;
  j["title"] = r.title;
  j["introduction"] = r.introduction;
  j["body_sections"] = nlohmann::ordered_json::array();
  for (const auto& s : r.body_sections) {
    j["body_sections"].push_back({{"heading", s.heading}, {"doc_ids", s.doc_ids}, {"text", s.text}});
  }
  j["conclusion"] = r.conclusion;
  j["bibliography"] = nlohmann::ordered_json::array();
  for (const auto& b : r.bibliography) {
    j["bibliography"].push_back({{"ref", b.ref}, {"doc_id", b.doc_id}, {"citation", b.citation}});
  }
  j["citation_violations"] = r.citation_violations;
  return j;
}

std::string to_markdown(const ReviewOutline& r) {
  std::string out = "# " + r.title + "\n\n";
  if (!r.introduction.empty()) out += r.introduction + "\n\n";
  for (const auto& s : r.body_sections) out += "## " + s.heading + "\n\n" + s.text + "\n\n";
  out += "## Conclusion\n\n" + r.conclusion + "\n\n## References\n\n";
  for (const auto& b : r.bibliography) out += "[" + std::to_string(b.ref) + "] " + b.citation + "\n";
  return out;
}

}  // namespace litpilot::investigation
