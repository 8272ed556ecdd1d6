#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "litpilot/embedding/contrastive.hpp"
#include "litpilot/embedding/mining.hpp"
#include "litpilot/llm/mock.hpp"
#include "litpilot/embedding/features.hpp"
#include "litpilot/embedding/projection.hpp"
#include "litpilot/error.hpp"
#include "support/fd_oracle.hpp"
#include "support/generators.hpp"
#include "support/toy_corpus.hpp"

using namespace litpilot;
using namespace litpilot::embedding;

namespace {

std::uint32_t ref_bucket(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<std::uint32_t>(h & 0x7FFF);
}

std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

std::vector<double> normalized_features(const FeatureVector& f) {
  std::vector<double> v(kFeatureDim, 0.0);
  double n = 0.0;
  for (const auto& [i, w] : f.entries) v[i] = w, n += w * w;
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

std::map<std::string, std::string> fixed_texts() {
  return {{"c1", "dense passage retrieval with dual encoders"},
          {"c2", "dense passage retrieval with dual encoders"},
          {"c3", "graph neural networks for molecules"},
          {"c4", "statistical machine translation of patents"}};
}

}  // namespace

TEST_CASE("featurize hashes 2- and 3-grams") {
  const auto f = featurize("abc");
  REQUIRE(f.entries.size() == 3);
  for (const char* g : {"ab", "bc", "abc"}) CHECK(f.weight(ref_bucket(g)) == 1.0);
  CHECK(featurize("").empty());
  CHECK(featurize("   ").empty());
  CHECK(featurize("a").empty());
  // Case and whitespace runs are normalized away.
  CHECK(featurize("Ab  C") == featurize("ab c"));
  // Repeated n-grams add up.
  CHECK(featurize("aaaa").weight(ref_bucket("aa")) == 3.0);
  CHECK(featurize("aaaa").weight(ref_bucket("aaa")) == 2.0);
  // CJK n-grams are over code points, not bytes.
  const auto z = featurize("检索模型");
  CHECK(z.weight(ref_bucket("检索")) == 1.0);
  CHECK(z.weight(ref_bucket("检索模")) == 1.0);
  CHECK(z.entries.size() == 5);
}

TEST_CASE("embed errors") {
  auto m = ProjectionModel::initialize(16, 0.05, 1);
  CHECK(kind_of([&] { embed("", m); }) == "EmptyInput");
  CHECK(kind_of([&] { embed("x", m); }) == "EmptyInput");
  ProjectionModel zero(16, 0.05, 1);
  CHECK(kind_of([&] { embed("hello", zero); }) == "DegenerateProjection");
  CHECK(kind_of([] { ProjectionModel(0, 0.05, 1); }) == "InvalidModel");
  CHECK(kind_of([] { ProjectionModel(4, 0.0, 1); }) == "InvalidModel");
}

TEST_CASE("embed returns unit vectors") {
  auto m = ProjectionModel::initialize(32, 0.05, 7);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto text = testing::random_prose(rng, 1 + rng.below(3));
    const auto v = embed(text, m);
    CHECK(v.dim() == 32);
    CHECK(std::abs(std::sqrt(dot(v.values, v.values)) - 1.0) <= 1e-6);
    CHECK(embed(text, m) == v);
  }
}

TEST_CASE("identity projection reproduces normalized features") {
  const std::vector<std::string> inputs = {"abc", "Dense retrieval", "检索增强生成", "aaaa bbbb", "x-ray 3.5 (see below)"};
  // W = I. A full 2^15 x 2^15 matrix does not fit in memory, so only the
  // diagonal entries the inputs can reach are stored; the rest of W is zero
  // off the diagonal and never read for these inputs.
  ProjectionModel id(kFeatureDim, 0.05, 0);
  for (const auto& s : inputs) {
    for (const auto& [c, w] : featurize(s).entries) id.set_weight(c, c, 1.0);
  }
  for (const auto& s : inputs) {
    const auto v = embed(s, id);
    const auto want = normalized_features(featurize(s));
    double max_err = 0.0;
    for (std::size_t i = 0; i < kFeatureDim; ++i) max_err = std::max(max_err, std::abs(v.values[i] - want[i]));
    CHECK(max_err < 1e-12);
  }
}

TEST_CASE("initialization bounds and determinism") {
  const auto a = ProjectionModel::initialize(8, 0.05, 42);
  const auto b = ProjectionModel::initialize(8, 0.05, 42);
  const auto c = ProjectionModel::initialize(8, 0.05, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const double bound = std::sqrt(6.0 / (kFeatureDim + 8));
  double max_abs = 0.0;
  for (std::uint32_t col = 0; col < kFeatureDim; col += 97) {
    for (std::size_t r = 0; r < 8; ++r) max_abs = std::max(max_abs, std::abs(a.weight(r, col)));
  }
  CHECK(max_abs < bound);
  CHECK(max_abs > 0.5 * bound);
  CHECK(a.all_finite());
}

TEST_CASE("model file round trip") {
  const auto m = ProjectionModel::initialize(4, 0.07, 5);
  const auto path = std::filesystem::temp_directory_path() / "litpilot_proj_test.bin";
  m.save(path);
  CHECK(std::filesystem::file_size(path) > 4u * kFeatureDim * 4u);
  const auto loaded = ProjectionModel::load(path);
  CHECK(loaded.d_out() == 4);
  CHECK(loaded.temperature() == 0.07);
  CHECK(loaded.seed() == 5);
  // Weights are stored as float32.
  for (std::uint32_t col : {0u, 17u, 32767u}) {
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(loaded.weight(r, col) == static_cast<double>(static_cast<float>(m.weight(r, col))));
    }
  }
  // Saving the loaded model reproduces the file exactly.
  const auto path2 = std::filesystem::temp_directory_path() / "litpilot_proj_test2.bin";
  loaded.save(path2);
  CHECK(ProjectionModel::load(path2) == loaded);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
  CHECK(kind_of([&] { ProjectionModel::load(path); }) == "IoError");
}

TEST_CASE("info_nce symmetry: equal similarities give ln(1 + k)") {
  auto m = ProjectionModel::initialize(16, 0.05, 9);
  const auto texts = fixed_texts();
  const TextResolver resolve = [&](const std::string& id) { return texts.at(id); };
  const auto one = info_nce(m, TrainingTriple{"dual encoders", "c1", {"c2"}}, resolve);
  CHECK(one.loss == std::log(2.0));
  const auto q = featurize("dual encoders");
  const auto p = featurize(texts.at("c1"));
  const std::vector<FeatureVector> three(3, p);
  CHECK(info_nce(m, q, p, three).loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(info_nce_loss(m, q, p, three) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("info_nce saturates when the positive dominates") {
  // W maps the positive's features onto e0 and the negative's onto e1, with
  // the question sharing the positive's n-grams.
  const auto q = featurize("abcabc");
  const auto p = featurize("abc");
  const auto n = featurize("xyz");
  ProjectionModel m(2, 0.05, 0);
  for (const auto& [c, w] : p.entries) m.set_weight(0, c, 1.0);
  for (const auto& [c, w] : n.entries) m.set_weight(1, c, 1.0);
  const auto lg = info_nce(m, q, p, std::vector<FeatureVector>{n});
  CHECK(lg.loss < 1e-3);
  CHECK(lg.loss >= 0.0);
  CHECK(lg.gradient.all_finite());
}

TEST_CASE("info_nce validation and resolution") {
  auto m = ProjectionModel::initialize(8, 0.05, 1);
  const auto texts = fixed_texts();
  const TextResolver resolve = [&](const std::string& id) { return texts.at(id); };
  CHECK(kind_of([&] { info_nce(m, TrainingTriple{"q", "c1", {}}, resolve); }) == "InvalidTriple");
  CHECK(kind_of([&] { info_nce(m, TrainingTriple{"q", "c1", {"c1"}}, resolve); }) == "InvalidTriple");
  CHECK(kind_of([&] { info_nce(m, TrainingTriple{"q", "c1", {"c3", "c3"}}, resolve); }) == "InvalidTriple");
  ProjectionModel zero(8, 0.05, 0);
  CHECK(kind_of([&] { info_nce(zero, TrainingTriple{"query", "c1", {"c3"}}, resolve); }) == "DegenerateProjection");
  const TrainingTriple t{"graph", "c3", {"c1", "c4"}};
  CHECK(triple_from_json(nlohmann::json::parse(to_json(t).dump())) == t);
}

TEST_CASE("info_nce gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto report = testing::run_fd_case(seed);
    INFO("seed " << seed);
    CHECK(report.entries_checked > 0);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("train_projection: no-op, determinism, validation") {
  const auto texts = fixed_texts();
  const TextResolver resolve = [&](const std::string& id) { return texts.at(id); };
  const std::vector<TrainingTriple> triples = {{"dense passage retrieval", "c1", {"c3", "c4"}},
                                               {"neural networks for molecules", "c3", {"c1", "c4"}},
                                               {"translation of patents", "c4", {"c2", "c3"}}};
  TrainingConfig cfg;
  cfg.d_out = 8;
  cfg.epochs = 0;
  cfg.seed = 11;
  const auto none = train_projection(triples, resolve, cfg);
  CHECK(none.model == ProjectionModel::initialize(8, 0.05, 11));
  CHECK(none.epoch_mean_loss.empty());

  cfg.epochs = 5;
  cfg.batch = 2;
  const auto a = train_projection(triples, resolve, cfg);
  const auto b = train_projection(triples, resolve, cfg);
  CHECK(a.model == b.model);
  CHECK(a.epoch_mean_loss == b.epoch_mean_loss);
  CHECK(a.epoch_mean_loss.size() == 5);
  CHECK_FALSE(a.model == none.model);
  CHECK(mean_loss(a.model, triples, resolve) < a.initial_mean_loss);

  cfg.learning_rate = 0.0;
  CHECK(kind_of([&] { train_projection(triples, resolve, cfg); }) == "InvalidHyperparameters");
  cfg.learning_rate = 0.1;
  CHECK(kind_of([&] { train_projection({}, resolve, cfg); }) == "InvalidTrainingSet");
}

TEST_CASE("training on the toy corpus halves the loss and beats raw features") {
  const auto toy = testing::make_toy_corpus();
  TrainingConfig cfg;
  cfg.seed = 7;
  const auto result = train_projection(toy.triples, toy.resolver(), cfg);
  REQUIRE(result.epoch_mean_loss.size() == 10);
  const double final_loss = mean_loss(result.model, toy.triples, toy.resolver());
  CHECK(final_loss <= 0.5 * result.initial_mean_loss);

  // Candidate sets drawn independently of the training negatives.
  const auto candidates = testing::other_topic_candidates(toy, 20, 99);
  const double raw = testing::recall_at_1(toy, candidates, testing::raw_feature_cosine);
  const double trained = testing::recall_at_1(toy, candidates, [&](const std::string& a, const std::string& b) {
    return dot(embed(a, result.model).values, embed(b, result.model).values);
  });
  MESSAGE("raw recall@1 " << raw << ", trained " << trained);
  CHECK(trained - raw >= 0.20);
}

namespace {

std::vector<corpus::Chunk> two_doc_chunks() {
  std::vector<corpus::Chunk> out;
  for (const char* doc : {"docA", "docB"}) {
    for (int i = 0; i < 3; ++i) {
      corpus::Chunk c;
      c.doc_id = doc;
      c.chunk_id = std::string(doc) + "-" + std::to_string(i);
      c.text = "chunk " + std::to_string(i) + " of " + doc;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("mine_triples") {
  const auto prompts = llm::PromptLibrary::load_default();
  const auto chunks = two_doc_chunks();
  llm::MockBackend q({{llm::MatchKind::kContains, "", "Q?"}});
  const auto r = mine_triples(chunks, q, prompts, 1, 5);
  REQUIRE(r.triples.size() == 6);
  CHECK(r.dropped == 0);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& t = r.triples[i];
    CHECK(t.question == "Q?");
    CHECK(t.positive_chunk == chunks[i].chunk_id);
    REQUIRE(t.negative_chunks.size() == 1);
    CHECK(t.negative_chunks[0].substr(0, 4) != chunks[i].doc_id.substr(0, 4));
  }
  CHECK(q.transcript()[0].messages[0].content.find("chunk 0 of docA") != std::string::npos);
  CHECK(mine_triples(chunks, q, prompts, 1, 5).triples == r.triples);
  const auto three = mine_triples(chunks, q, prompts, 3, 5);
  for (const auto& t : three.triples) CHECK(t.negative_chunks.size() == 3);

  // Empty questions are dropped without disturbing the others' negatives.
  llm::MockBackend some({{llm::MatchKind::kContains, "chunk 1 of docA", "  "}, {llm::MatchKind::kContains, "", "Q?"}});
  const auto d = mine_triples(chunks, some, prompts, 1, 5);
  CHECK(d.dropped == 1);
  REQUIRE(d.triples.size() == 5);
  CHECK(d.triples[1] == r.triples[2]);

  CHECK(kind_of([&] { mine_triples(chunks, q, prompts, 4, 5); }) == "InsufficientCorpus");
  CHECK(kind_of([&] { mine_triples(std::vector<corpus::Chunk>(chunks.begin(), chunks.begin() + 3), q, prompts, 1, 5); }) ==
        "InsufficientCorpus");
  CHECK(kind_of([&] { mine_triples(chunks, q, prompts, 0, 5); }) == "InvalidHyperparameters");
  llm::UnavailableBackend down;
  CHECK(kind_of([&] { mine_triples(chunks, down, prompts, 1, 5); }) == "BackendFailure");
}
