#include "litpilot/reading/reading.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <set>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::reading {
namespace {

constexpr std::size_t kLeadTokens = 150;

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

// "IN" / "OUT" as the first word of the answer, ignoring case and trailing punctuation.
std::optional<Route> parse_route(std::string_view answer) {
  auto t = utf8::trim(answer);
  const auto end = t.find_first_of(" \t\r\n.,;:!");
  const auto word = utf8::ascii_upper(t.substr(0, end));
  if (word == "IN") return Route::kInPaper;
  if (word == "OUT") return Route::kOutOfPaper;
  return std::nullopt;
}

std::string table_cell(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

std::string complete_text(llm::Backend& backend, const std::string& prompt, const llm::DeltaSink* on_delta) {
  if (!on_delta) return llm::ask(backend, prompt, 1024);
  auto req = llm::user_request(prompt, 1024);
  req.stream = true;
  const auto c = backend.stream(req, *on_delta);
  if (c.finish == llm::Finish::kError) throw backend_error("BackendFailure", "backend reported an error");
  return c.content;
}

}  // namespace

std::string_view to_string(Route r) { return r == Route::kInPaper ? "InPaper" : "OutOfPaper"; }

double question_evidence(const std::string& question, const std::vector<corpus::Chunk>& chunks,
                         const embedding::ProjectionModel& model) {
  embedding::EmbeddingVector q;
  try {
    q = embedding::embed(question, model);
  } catch (const Error& e) {
    if (e.kind() == "EmptyInput" || e.kind() == "DegenerateProjection") return 0.0;
    throw;
  }
  double best = -1.0;
  for (const auto& c : chunks) {
    try {
      const auto v = embedding::embed(c.text, model);
      best = std::max(best, std::clamp(embedding::dot(q.values, v.values), -1.0, 1.0));
    } catch (const Error& e) {
      if (e.kind() != "EmptyInput" && e.kind() != "DegenerateProjection") throw;
    }
  }
  return best;
}

RoutedQuestion route_question(const std::string& question, const corpus::PaperDocument& paper,
                              const std::vector<corpus::Chunk>& chunks, const embedding::ProjectionModel& model,
                              llm::Backend& backend, const llm::PromptLibrary& prompts, double theta) {
  RoutedQuestion rq;
  rq.question = std::string(utf8::trim(question));
  if (rq.question.empty()) throw invalid_input("EmptyQuestion", "question is empty");
  if (chunks.empty()) throw invalid_input("EmptyPaper", "paper " + paper.doc_id + " has no chunks");
  rq.evidence = question_evidence(rq.question, chunks, model);

  std::optional<Route> route;
  try {
    route = parse_route(llm::ask(
        backend,
        prompts.render("route", {{"title", paper.title}, {"abstract", abstract_or_lead(paper)}, {"question", rq.question}}),
        8));
  } catch (const std::exception& e) {
    if (!llm::is_backend_failure(e)) throw;
  }
  rq.used_fallback = !route;
  rq.route = route ? *route : (rq.evidence >= theta ? Route::kInPaper : Route::kOutOfPaper);
  return rq;
}

std::vector<std::string> cited_segments(const std::string& text, const std::vector<std::string>& retrieved) {
  std::vector<std::string> out;
  for (std::size_t pos = text.find("[S"); pos != std::string::npos; pos = text.find("[S", pos + 1)) {
    std::size_t i = pos + 2;
    std::size_t n = 0;
    std::size_t digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9' && digits < 9) {
      n = n * 10 + static_cast<std::size_t>(text[i] - '0');
      ++i;
      ++digits;
    }
    if (digits == 0 || i >= text.size() || text[i] != ']') continue;
    if (n < 1 || n > retrieved.size()) continue;
    const auto& id = retrieved[n - 1];
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  }
  return out;
}

nlohmann::ordered_json to_json(const Answer& a) {
  nlohmann::ordered_json j;
  j["text"] = a.text;
  j["cited_chunk_ids"] = a.cited_chunk_ids;
  j["retrieved_chunk_ids"] = a.retrieved_chunk_ids;
  j["route"] = to_string(a.route);
  j["degraded"] = a.degraded;
  return j;
}

Answer answer_question(const RoutedQuestion& rq, const corpus::PaperDocument& paper, const ReadingDeps& deps,
                       std::size_t k, const llm::DeltaSink* on_delta) {
  if (rq.question.empty()) throw invalid_input("EmptyQuestion", "question is empty");
  if (k == 0) throw invalid_input("InvalidK", "k must be at least 1");
  Answer a;
  a.route = rq.route;

  if (rq.route == Route::kInPaper) {
    try {
      const auto v = deps.kb.embed(rq.question);
      retrieval::SearchFilter f;
      f.doc_ids = {paper.doc_id};
      for (const auto& h : deps.kb.index().hybrid_search(rq.question, v, f, k)) a.retrieved_chunk_ids.push_back(h.chunk_id);
    } catch (const Error& e) {
      if (e.kind() != "EmptyInput" && e.kind() != "DegenerateProjection") throw;
    }
  } else {
    const auto it = deps.plugins.find(query::kLocalPlugin);
    if (it == deps.plugins.end() || !it->second) {
      throw backend_error("PluginFailure", std::string("no ") + query::kLocalPlugin + " plugin registered");
    }
    query::StructuredQuery q;
    q.keywords = retrieval::query_terms(rq.question);
    q.free_text = rq.question;
    const auto own = deps.kb.contains(paper.doc_id) ? deps.kb.chunks_of(paper.doc_id).size() : 0;
    std::vector<retrieval::SearchHit> hits;
    try {
      hits = it->second->execute(q, k + own);
    } catch (const std::exception& e) {
      throw backend_error("PluginFailure", e.what());
    }
    for (const auto& h : hits) {
      if (h.doc_id == paper.doc_id) continue;
      a.retrieved_chunk_ids.push_back(h.chunk_id);
      if (a.retrieved_chunk_ids.size() == k) break;
    }
  }

  if (a.retrieved_chunk_ids.empty()) {
    a.text = kInsufficientContext;
    a.degraded = true;
    return a;
  }

  std::string segments;
  for (std::size_t i = 0; i < a.retrieved_chunk_ids.size(); ++i) {
    const auto entry = deps.kb.index().get(a.retrieved_chunk_ids[i]);
    if (i > 0) segments += "\n\n";
    segments += "[S" + std::to_string(i + 1) + "] " + (entry ? entry->text : std::string());
  }
  const auto prompt = deps.prompts.render("read_answer", {{"question", rq.question}, {"segments", segments}});
  a.text = complete_text(deps.backend, prompt, on_delta);
  a.cited_chunk_ids = cited_segments(a.text, a.retrieved_chunk_ids);
  return a;
}

std::vector<std::string> prefixed_lines(const std::string& text, std::string_view prefix) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const auto line = utf8::trim(std::string_view(text).substr(pos, nl - pos));
    if (line.substr(0, prefix.size()) == prefix) {
      const auto value = utf8::trim(line.substr(prefix.size()));
      if (!value.empty()) out.emplace_back(value);
    }
    pos = nl + 1;
  }
  return out;
}

std::string abstract_or_lead(const corpus::PaperDocument& doc) {
  if (!utf8::trim(doc.abstract).empty()) return doc.abstract;
  std::string lead;
  corpus::for_each_section(doc.sections, [&](const corpus::Section& s, const std::vector<std::string>&) {
    if (lead.empty() && !utf8::trim(s.body).empty()) lead = std::string(corpus::first_tokens(s.body, kLeadTokens));
  });
  return lead;
}

ComparisonReport compare_papers(const std::vector<std::string>& doc_ids, const kb::KnowledgeBase& kb,
                                llm::Backend& backend, const llm::PromptLibrary& prompts) {
  const auto n = doc_ids.size();
  if (n < kMinCompare || n > kMaxCompare) {
    const long limit = static_cast<long>(n < kMinCompare ? kMinCompare : kMaxCompare);
    throw domain_rule("CountOutOfRange",
                      std::to_string(n) + " papers given; comparison takes " + std::to_string(kMinCompare) + " to " +
                          std::to_string(kMaxCompare),
                      limit);
  }
  std::set<std::string> seen;
  for (const auto& id : doc_ids) {
    if (!seen.insert(id).second) throw invalid_input("DuplicateDocId", id);
  }
  std::vector<corpus::PaperDocument> docs;
  for (const auto& id : doc_ids) docs.push_back(kb.document(id));

  auto extract = [&](const corpus::PaperDocument& d) {
    PaperSummary p;
    p.doc_id = d.doc_id;
    p.title = d.title;
    p.abstract = abstract_or_lead(d);
    const auto out =
        llm::ask(backend, prompts.render("extract_contrib", {{"title", d.title}, {"abstract", p.abstract}}), 512);
    p.contributions = prefixed_lines(out, "CONTRIB:");
    const auto approach = prefixed_lines(out, "APPROACH:");
    if (!approach.empty()) p.approach = approach.front();
    p.advantages = prefixed_lines(out, "ADVANTAGE:");
    return p;
  };
  // One prompt per paper in flight at once; get() rethrows in input order.
  std::vector<std::future<PaperSummary>> pending;
  for (const auto& d : docs) pending.push_back(std::async(std::launch::async, extract, std::cref(d)));
  ComparisonReport r;
  for (auto& f : pending) r.per_paper.push_back(f.get());

  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < r.per_paper.size(); ++i) {
    const auto& p = r.per_paper[i];
    blocks.push_back("Paper " + std::to_string(i + 1) + ": " + p.title + "\nApproach: " + p.approach +
                     "\nAdvantages: " + join(p.advantages, "; ") + "\nContributions: " + join(p.contributions, "; "));
  }
  const auto out = llm::ask(backend, prompts.render("compare_summary", {{"summaries", join(blocks, "\n\n")}}), 512);
  r.similarities = prefixed_lines(out, "SIMILARITY:");
  r.differences = prefixed_lines(out, "DIFFERENCE:");
  return r;
}

nlohmann::ordered_json to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["per_paper"] = nlohmann::ordered_json::array();
  j["table"] = nlohmann::ordered_json::array();
  for (const auto& p : r.per_paper) {
    j["per_paper"].push_back(
        {{"doc_id", p.doc_id}, {"title", p.title}, {"abstract", p.abstract}, {"contributions", p.contributions}});
    j["table"].push_back({{"doc_id", p.doc_id}, {"approach", p.approach}, {"advantages", p.advantages}});
  }
  j["similarities"] = r.similarities;
  j["differences"] = r.differences;
  return j;
}

std::string to_markdown(const ComparisonReport& r) {
  std::string out = "| Paper | Approach | Advantages |\n|---|---|---|\n";
  for (const auto& p : r.per_paper) {
    out += "| " + table_cell(p.title) + " | " + table_cell(p.approach) + " | " + table_cell(join(p.advantages, "; ")) +
           " |\n";
  }
  out += "\n### Similarities\n\n";
  for (const auto& s : r.similarities) out += "- " + s + "\n";
  out += "\n### Differences\n\n";
  for (const auto& s : r.differences) out += "- " + s + "\n";
  return out;
}

}  // namespace litpilot::reading
