#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "litpilot/corpus/text.hpp"
#include "litpilot/investigation/investigation.hpp"
#include "litpilot/util/rng.hpp"
#include "support/fixtures.hpp"
#include "support/kmeans_oracle.hpp"

using namespace litpilot;
using namespace litpilot::investigation;
using namespace litpilot::testing;
using embedding::EmbeddingVector;

namespace {

// Normal-equation slope over every year in [min, max], zero-filled.
double oracle_slope(const std::map<int, std::size_t>& h) {
  if (h.size() < 2) return 0.0;
  long double n = 0, sx = 0, sy = 0, sxy = 0, sxx = 0;
  for (int y = h.begin()->first; y <= h.rbegin()->first; ++y) {
    const auto it = h.find(y);
    const long double c = it == h.end() ? 0 : it->second;
    n += 1;
    sx += y;
    sy += c;
    sxy += static_cast<long double>(y) * c;
    sxx += static_cast<long double>(y) * y;
  }
  return static_cast<double>((n * sxy - sx * sy) / (n * sxx - sx * sx));
}

corpus::PaperDocument paper(std::string id, std::string title, std::string abstract, std::optional<int> year,
                            std::vector<std::string> authors = {"A"}) {
  corpus::PaperDocument d;
  d.doc_id = std::move(id);
  d.title = std::move(title);
  d.abstract = std::move(abstract);
  d.year = year;
  d.authors = std::move(authors);
  d.sections.push_back({"Body", 1, "text", {}});
  return d;
}

struct FailOn : llm::Backend {
  std::string needle;
  llm::MockBackend inner;
  explicit FailOn(std::string n) : needle(std::move(n)), inner(llm::MockBackend::rules_from_file(fixture("mock_rules.json"))) {}
  std::string name() const override { return "fail-on"; }
  llm::Completion complete(const llm::ChatRequest& r) override {
    if (r.last_user_content().find(needle) != std::string::npos) return {"", llm::Finish::kError, 0, 0};
    return inner.complete(r);
  }
};

struct Fixture {
  std::shared_ptr<kb::KnowledgeBase> kb = std::make_shared<kb::KnowledgeBase>();
  std::map<std::string, std::string> ids;
  llm::PromptLibrary prompts = llm::PromptLibrary::load_default();
  query::Gazetteer gaz = gazetteer();
  query::Registry plugins;
  Fixture() {
    ids = ingest_papers(*kb);
    plugins = kb::default_registry(kb);
  }
  std::vector<std::string> all_ids() const {
    std::vector<std::string> out;
    for (const auto& [stem, id] : ids) out.push_back(id);
    return out;
  }
};

}  // namespace

TEST_CASE("trend slope matches the normal equations") {
  CHECK(trend_slope({}) == 0.0);
  CHECK(trend_slope({{2020, 4}}) == 0.0);
  CHECK(trend_slope({{2019, 1}, {2020, 2}, {2021, 3}}) == doctest::Approx(1.0).epsilon(1e-12));
  // Gap years count as zero: 2018:3, 2019:0, 2020:0, 2021:3 is flat.
  CHECK(trend_slope({{2018, 3}, {2021, 3}}) == doctest::Approx(0.0).epsilon(1e-12));
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::map<int, std::size_t> h;
    const int base = 1990 + static_cast<int>(rng.below(20));
    const auto years = 1 + rng.below(8);
    for (std::size_t i = 0; i < years; ++i) h[base + static_cast<int>(rng.below(15))] = 1 + rng.below(9);
    CHECK(std::fabs(trend_slope(h) - oracle_slope(h)) < 1e-9);
  }
}

TEST_CASE("summary stats conserve the paper count") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<corpus::PaperDocument> papers;
    const auto n = rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      std::optional<int> year;
      if (rng.below(4) != 0) year = 2015 + static_cast<int>(rng.below(8));
      papers.push_back(paper("d" + std::to_string(i), "Graph models " + std::to_string(i), "sampling nodes", year));
    }
    const auto s = compute_summary_stats(papers);
    std::size_t total = s.undated_count;
    for (const auto& [y, c] : s.year_histogram) total += c;
    CHECK(total == n);
    CHECK(s.paper_count == n);
    CHECK(std::fabs(s.trend_slope - oracle_slope(s.year_histogram)) < 1e-9);
  }
}

TEST_CASE("top keywords match a brute-force tf-idf") {
  const std::vector<corpus::PaperDocument> ref = {
      paper("a", "Graph sampling at scale", "We sample graph neighbors to train graph networks in 2023.", 2023),
      paper("b", "Neural machine translation", "Terminology helps translation of academic text.", 2020),
      paper("c", "Graph translation", "Graph models meet translation.", 2021),
      paper("d", "Passage retrieval", "Dense retrieval of passages for questions.", 2019)};
  const std::vector<corpus::PaperDocument> sel = {ref[0], ref[2]};

  std::map<std::string, double> tf;
  std::map<std::string, std::size_t> df;
  auto usable = [](const std::string& t) {
    return !corpus::is_stopword(t) && !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  for (const auto& d : sel) {
    for (const auto& t : corpus::terms(d.title + "\n" + d.abstract)) {
      if (usable(t)) tf[t] += 1;
    }
  }
  for (const auto& d : ref) {
    std::set<std::string> seen;
    for (const auto& t : corpus::terms(d.title + "\n" + d.abstract)) seen.insert(t);
    for (const auto& t : seen) ++df[t];
  }
  std::vector<KeywordScore> want;
  for (const auto& [t, f] : tf) want.push_back({t, f * (std::log(5.0 / (static_cast<double>(df[t]) + 1.0)) + 1.0)});
  std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.term < b.term;
  });
  want.resize(std::min<std::size_t>(want.size(), 10));

  const auto got = top_keywords(sel, ref, 10);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].term == want[i].term);
    CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
  }
  CHECK(got[0].term == "graph");
}

TEST_CASE("recent keywords come from the latest year") {
  const std::vector<corpus::PaperDocument> papers = {paper("a", "Old topic", "legacy parsing", 2018),
                                                     paper("b", "New topic", "diffusion sampling", 2024),
                                                     paper("c", "Undated", "mystery", std::nullopt)};
  const auto s = compute_summary_stats(papers);
  std::set<std::string> recent;
  for (const auto& k : s.recent_keywords) recent.insert(k.term);
  CHECK(recent.count("diffusion") == 1);
  CHECK(recent.count("legacy") == 0);
  CHECK(s.undated_count == 1);
}

TEST_CASE("k-means objective is non-increasing and near the exhaustive optimum") {
  for (std::uint64_t data_seed : {1, 2, 3, 4, 5}) {
    const auto pts = eight_points(data_seed);
    std::vector<EmbeddingVector> list;
    for (const auto& [id, v] : pts) list.push_back(v);
    for (std::size_t k : {2, 3}) {
      const double opt = exhaustive_optimum(list, k);
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto a = cluster_papers(pts, k, seed);
        for (std::size_t i = 1; i < a.objective_trace.size(); ++i) {
          CHECK(a.objective_trace[i] <= a.objective_trace[i - 1] + 1e-12);
        }
        std::vector<std::size_t> labels;
        for (const auto& [id, l] : a.labels) labels.push_back(l);
        CHECK(oracle_objective(list, labels, k) == doctest::Approx(a.objective).epsilon(1e-9));
        CHECK(assignment_objective(list, labels, k) == doctest::Approx(a.objective).epsilon(1e-9));
        CHECK(a.objective >= opt - 1e-9);
        CHECK(a.objective <= 1.05 * opt + 1e-12);
        CHECK(std::set<std::size_t>(labels.begin(), labels.end()).size() == k);
      }
    }
  }
}

TEST_CASE("k-means is deterministic per seed and validates k") {
  const auto pts = eight_points(9);
  const auto a = cluster_papers(pts, 3, 42);
  const auto b = cluster_papers(pts, 3, 42);
  CHECK(a.labels == b.labels);
  CHECK(a.objective == b.objective);
  CHECK(kind_of([&] { cluster_papers(pts, 0, 1); }) == "InvalidK");
  CHECK(kind_of([&] { cluster_papers(pts, 9, 1); }) == "InvalidK");
  // Identical points: k-means++ has no spread to sample from.
  std::map<std::string, EmbeddingVector> same;
  for (int i = 0; i < 4; ++i) same["s" + std::to_string(i)] = unit({1, 1, 0});
  const auto c = cluster_papers(same, 2, 0);
  CHECK(c.objective == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("topic search over the fixture corpus") {
  Fixture f;
  auto backend = mock_backend();
  const TopicSearchDeps deps{*backend, f.prompts, f.gaz, f.plugins, *f.kb};
  const auto r = topic_search("Could you find recent papers on retrieval augmented generation since 2021?", deps, 5);
  CHECK(r.rewritten_query == "retrieval augmented generation since 2021");
  CHECK(r.structured.domains == std::vector<std::string>{"retrieval augmented generation"});
  REQUIRE_FALSE(r.hits.empty());
  std::set<std::string> docs;
  for (std::size_t i = 0; i < r.hits.size(); ++i) {
    CHECK(*f.kb->document(r.hits[i].doc_id).year >= 2021);
    CHECK(docs.insert(r.hits[i].doc_id).second);
    if (i > 0) CHECK(r.hits[i - 1].score >= r.hits[i].score);
  }
  CHECK(r.stats.paper_count == r.hits.size());
  CHECK(r.summary.find("Research on this topic") == 0);
  CHECK_FALSE(r.degraded);
}

TEST_CASE("topic search without hits makes no summary call") {
  Fixture f;
  auto backend = mock_backend();
  const TopicSearchDeps deps{*backend, f.prompts, f.gaz, f.plugins, *f.kb};
  const auto r = topic_search("qqqq zzzz", deps, 5);
  CHECK(r.hits.empty());
  CHECK(r.stats.paper_count == 0);
  for (const auto& e : backend->transcript()) CHECK(e.messages.back().content.find("Task: topic_summary") == std::string::npos);
}

TEST_CASE("a failed summary degrades topic search") {
  Fixture f;
  FailOn backend("Task: topic_summary");
  const TopicSearchDeps deps{backend, f.prompts, f.gaz, f.plugins, *f.kb};
  const auto r = topic_search("graph neural networks sampling", deps, 5);
  REQUIRE_FALSE(r.hits.empty());
  CHECK(r.degraded);
  CHECK(r.summary.empty());
  CHECK_FALSE(r.warning.empty());
}

TEST_CASE("scholar survey groups the scholar's papers") {
  Fixture f;
  auto backend = mock_backend();
  const auto s = scholar_survey("lin wei", *f.kb, *backend, f.prompts);
  std::vector<std::string> expected;
  std::vector<EmbeddingVector> vecs;
  for (const auto& d : f.kb->documents()) {
    if (std::find(d.authors.begin(), d.authors.end(), "Lin Wei") == d.authors.end()) continue;
    expected.push_back(d.doc_id);
    vecs.push_back(f.kb->embed(kb::KnowledgeBase::paper_text(d)));
  }
  REQUIRE(expected.size() == 6);
  REQUIRE(s.groups.size() == 2);  // ceil(6 / 3)
  std::vector<std::string> seen;
  std::map<std::string, std::size_t> label_of;
  for (std::size_t g = 0; g < s.groups.size(); ++g) {
    CHECK_FALSE(s.groups[g].label.empty());
    if (g > 0) CHECK(s.groups[g - 1].doc_ids.size() >= s.groups[g].doc_ids.size());
    for (const auto& id : s.groups[g].doc_ids) {
      seen.push_back(id);
      label_of[id] = g;
    }
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen == expected);
  std::vector<std::size_t> labels;
  for (const auto& id : expected) labels.push_back(label_of[id]);
  const double opt = exhaustive_optimum(vecs, 2);
  CHECK(oracle_objective(vecs, labels, 2) <= 1.05 * opt + 1e-12);

  CHECK(kind_of([&] { scholar_survey("  ", *f.kb, *backend, f.prompts); }) == "EmptyName");
  CHECK(kind_of([&] { scholar_survey("Nobody Here", *f.kb, *backend, f.prompts); }) == "ScholarNotFound");
}

TEST_CASE("review rules are checked before any backend call") {
  Fixture f;
  auto backend = mock_backend();
  const auto ids = f.all_ids();
  CHECK(kind_of([&] { generate_review({}, *f.kb, *backend, f.prompts); }) == "EmptyDocList");
  std::vector<std::string> many;
  for (int i = 0; i < 31; ++i) many.push_back("id" + std::to_string(i));
  CHECK(kind_of([&] { generate_review(many, *f.kb, *backend, f.prompts); }) == "LimitExceeded");
  CHECK(limit_of([&] { generate_review(many, *f.kb, *backend, f.prompts); }) == 30);
  CHECK(kind_of([&] { generate_review({ids[0], ids[0]}, *f.kb, *backend, f.prompts); }) == "DuplicateDocId");
  CHECK(kind_of([&] { generate_review({ids[0], "missing"}, *f.kb, *backend, f.prompts); }) == "UnknownDocId");
  CHECK(backend->call_count() == 0);
}

TEST_CASE("review citations are renumbered in first-citation order") {
  Fixture f;
  auto backend = mock_backend();
  const auto r = generate_review(f.all_ids(), *f.kb, *backend, f.prompts);
  CHECK(r.citation_violations == 0);
  CHECK(r.title == "Retrieval, Translation and Graph Learning: A Review");
  REQUIRE(r.bibliography.size() == 12);
  std::set<std::string> bib_ids;
  for (std::size_t i = 0; i < r.bibliography.size(); ++i) {
    CHECK(r.bibliography[i].ref == i + 1);
    bib_ids.insert(r.bibliography[i].doc_id);
    CHECK(r.bibliography[i].citation == citation_string(f.kb->document(r.bibliography[i].doc_id)));
  }
  CHECK(bib_ids.size() == 12);
  // First mentions across intro, sections, conclusion are 1, 2, 3, ...
  std::vector<std::size_t> order;
  auto collect = [&](const std::string& text) {
    for (auto n : citation_markers(text)) {
      CHECK(n >= 1);
      CHECK(n <= 12);
      if (std::find(order.begin(), order.end(), n) == order.end()) order.push_back(n);
    }
  };
  collect(r.introduction);
  for (const auto& s : r.body_sections) collect(s.text);
  collect(r.conclusion);
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == i + 1);
  // Sections cover every paper once, largest first.
  std::size_t members = 0;
  for (std::size_t i = 0; i < r.body_sections.size(); ++i) {
    members += r.body_sections[i].doc_ids.size();
    if (i > 0) CHECK(r.body_sections[i - 1].doc_ids.size() >= r.body_sections[i].doc_ids.size());
  }
  CHECK(members == 12);
  CHECK(r.body_sections.size() == 3);  // ceil(12 / 5)
}

TEST_CASE("unresolvable citations are stripped and counted") {
  Fixture f;
  llm::MockBackend backend({{llm::MatchKind::kContains, "Task: review_intro", "TITLE: T\nIntro [7]."},
                            {llm::MatchKind::kContains, "Task: review_section", "HEADING: H\nSee [1] and [42, 2]."},
                            {llm::MatchKind::kContains, "", "Done."}});
  const auto ids = f.all_ids();
  const auto r = generate_review({ids[0], ids[1], ids[2]}, *f.kb, backend, f.prompts);
  // [7] and [42] do not resolve among three papers.
  CHECK(r.citation_violations == 2);
  CHECK(r.introduction.find("[7]") == std::string::npos);
  for (const auto& s : r.body_sections) CHECK(s.text.find("42") == std::string::npos);
  CHECK(r.bibliography.size() == 3);
}

TEST_CASE("review markdown carries headings and references") {
  Fixture f;
  auto backend = mock_backend();
  const auto ids = f.all_ids();
  const auto md = to_markdown(generate_review({ids[0], ids[5]}, *f.kb, *backend, f.prompts));
  CHECK(md.rfind("# ", 0) == 0);
  CHECK(md.find("## Conclusion") != std::string::npos);
  CHECK(md.find("## References") != std::string::npos);
  CHECK(md.find("[1] ") != std::string::npos);
}

TEST_CASE("topic search and review golden outputs") {
  Fixture f;
  auto backend = mock_backend();
  const TopicSearchDeps deps{*backend, f.prompts, f.gaz, f.plugins, *f.kb};
  const auto t = topic_search("Could you find recent papers on retrieval augmented generation since 2021?", deps, 5);
  check_golden("topic_search.json", to_json(t).dump(2) + "\n");

  const auto r = generate_review(f.all_ids(), *f.kb, *backend, f.prompts);
  check_golden("review_12.md", to_markdown(r));
  check_golden("review_12.json", to_json(r).dump(2) + "\n");
}
