#include "litpilot/app/ops.hpp"

#include "litpilot/investigation/investigation.hpp"
#include "litpilot/reading/reading.hpp"
#include "litpilot/writing/writing.hpp"

namespace litpilot::app {
namespace {

std::size_t effective_k(const Runtime& rt, std::size_t k) { return k == 0 ? rt.config().default_k : k; }

}  // namespace

std::vector<retrieval::SearchHit> search_hits(const Runtime& rt, std::string_view query, std::size_t k,
                                              const retrieval::SearchFilter& filter) {
  const auto vec = rt.kb().embed(query);
  return rt.kb().index().hybrid_search(query, vec, filter, effective_k(rt, k));
}

nlohmann::ordered_json search(const Runtime& rt, std::string_view query, std::size_t k,
                              const retrieval::SearchFilter& filter) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& h : search_hits(rt, query, k, filter)) out.push_back(retrieval::to_json(h));
  return out;
}

nlohmann::ordered_json paper_list(const Runtime& rt) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& d : rt.kb().documents()) {
    nlohmann::ordered_json j;
    j["doc_id"] = d.doc_id;
    j["title"] = d.title;
    j["authors"] = d.authors;
    j["year"] = d.year ? nlohmann::ordered_json(*d.year) : nlohmann::ordered_json(nullptr);
    j["venue"] = d.venue ? nlohmann::ordered_json(*d.venue) : nlohmann::ordered_json(nullptr);
    j["domains"] = d.domains;
    out.push_back(std::move(j));
  }
  return out;
}

nlohmann::ordered_json paper(const Runtime& rt, const std::string& doc_id) {
  auto j = corpus::to_json(rt.kb().document(doc_id));
  j["chunks"] = nlohmann::ordered_json::array();
  for (const auto& c : rt.kb().chunks_of(doc_id)) j["chunks"].push_back(corpus::to_json(c));
  return j;
}

nlohmann::ordered_json compare(const Runtime& rt, const std::vector<std::string>& doc_ids) {
  return reading::to_json(reading::compare_papers(doc_ids, rt.kb(), rt.backend("compare"), rt.prompts()));
}

nlohmann::ordered_json review(const Runtime& rt, const std::vector<std::string>& doc_ids) {
  return investigation::to_json(
      investigation::generate_review(doc_ids, rt.kb(), rt.backend("review"), rt.prompts(), rt.config().seed));
}

nlohmann::ordered_json survey(const Runtime& rt, const std::string& name) {
  return investigation::to_json(
      investigation::scholar_survey(name, rt.kb(), rt.backend("survey"), rt.prompts(), rt.config().seed));
}

nlohmann::ordered_json topic(const Runtime& rt, std::string_view query, std::size_t k) {
  const investigation::TopicSearchDeps deps{rt.backend("topic"), rt.prompts(), rt.gazetteer(), rt.plugins(), rt.kb()};
  return investigation::to_json(investigation::topic_search(query, deps, effective_k(rt, k)));
}

nlohmann::ordered_json translate(const Runtime& rt, std::string_view source, std::string_view direction,
                                 const std::optional<std::string>& domain) {
  return writing::to_json(writing::translate(source, writing::direction_from_string(direction), rt.lexicon(),
                                             rt.backend("translate"), rt.prompts(), domain));
}

nlohmann::ordered_json polish(const Runtime& rt, std::string_view draft, std::string_view style) {
  return writing::to_json(writing::polish(draft, writing::style_from_string(style), rt.backend("polish"), rt.prompts()));
}

}  // namespace litpilot::app
