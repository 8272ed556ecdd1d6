#include <doctest.h>

#include <cmath>
#include <map>

#include "litpilot/evalkit/evalkit.hpp"
#include "litpilot/util/rng.hpp"
#include "support/bleu_oracle.hpp"
#include "support/fixtures.hpp"

using namespace litpilot;
using namespace litpilot::evalkit;
using namespace litpilot::testing;

namespace {

std::vector<MosRecord> records(Task task, Criterion c, int fives, int fours) {
  std::vector<MosRecord> out;
  for (int i = 0; i < fives; ++i) out.emplace_back(task, c, "r" + std::to_string(i), 5);
  for (int i = 0; i < fours; ++i) out.emplace_back(task, c, "r" + std::to_string(fives + i), 4);
  return out;
}

}  // namespace

TEST_CASE("perfect match scores exactly one") {
  const auto t = words("the cat sat down");
  CHECK(bleu(t, {t}) == 1.0);
  CHECK(bleu(t, {words("a dog"), t}) == 1.0);
}

TEST_CASE("clipping on a repeated word") {
  const auto cand = words("the the the the the the the");
  const auto ref = words("the cat is on the mat");
  const auto s = bleu_stats(cand, {ref});
  CHECK(s.matches[0] == 2);
  CHECK(s.totals[0] == 7);
  // By hand: p1 = 2/7, no bigram, trigram or 4-gram matches, so p2..p4 are
  // 1/(2*6), 1/(2*5), 1/(2*4); c = 7 > r = 6 so BP = 1.
  const double hand = std::pow(2.0 / 7.0 * (1.0 / 12.0) * (1.0 / 10.0) * (1.0 / 8.0), 0.25);
  CHECK(bleu(cand, {ref}) == doctest::Approx(hand).epsilon(1e-12));
  CHECK(hand == doctest::Approx(std::pow(1.0 / 3360.0, 0.25)).epsilon(1e-12));
}

TEST_CASE("brevity penalty at c = 5, r = 10") {
  CHECK(std::fabs(brevity_penalty(5, 10) - std::exp(-1.0)) < 1e-9);
  CHECK(std::fabs(brevity_penalty(5, 10) - 0.367879441171) < 1e-9);
  CHECK(brevity_penalty(11, 10) == 1.0);
  CHECK(brevity_penalty(10, 10) == 1.0);
}

TEST_CASE("ten hand-made pairs match the from-scratch scorer") {
  const auto pairs = hand_pairs();
  for (const auto& [c, rs] : pairs) {
    std::vector<Tokens> refs;
    for (const auto& r : rs) refs.push_back(words(r));
    INFO(c);
    CHECK(bleu(words(c), refs) == doctest::Approx(scratch_bleu(words(c), refs)).epsilon(1e-12));
  }
  // Pair 3 by hand: all precisions 1, c = 5, r = 10.
  CHECK(bleu(words("a b c d e"), {words("a b c d e f g h i j")}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(bleu(words("x y z"), {words("a b c")}) == 0.0);
  CHECK(bleu({}, {words("a")}) == 0.0);
  CHECK(kind_of([] { bleu(words("a"), {}); }) == "EmptyReferences");
}

TEST_CASE("random token lists: range, self-match and clipped matches") {
  Rng rng(31);
  auto random_tokens = [&](std::size_t n) {
    Tokens t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(std::string(1, static_cast<char>('a' + rng.below(5))));
    return t;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto cand = random_tokens(1 + rng.below(12));
    std::vector<Tokens> refs = {random_tokens(1 + rng.below(12))};
    const double s = bleu(cand, refs);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s == doctest::Approx(scratch_bleu(cand, refs)).epsilon(1e-12));
    if (cand.size() >= 4) CHECK(bleu(cand, {refs[0], cand}) == 1.0);

    // Another reference never lowers a clipped match count.
    const auto before = bleu_stats(cand, refs);
    refs.push_back(random_tokens(1 + rng.below(12)));
    const auto after = bleu_stats(cand, refs);
    for (std::size_t n = 0; n < 4; ++n) CHECK(after.matches[n] >= before.matches[n]);
    // With the closest reference length unchanged, the score cannot drop.
    if (after.reference_length == before.reference_length) CHECK(bleu(cand, refs) >= s - 1e-12);
  }
}

TEST_CASE("a new reference can lower the score through the brevity penalty") {
  // c = 6 and r = 2 gives BP = 1. A disjoint 7-token reference is closer
  // (|7 - 6| < |2 - 6|), so r becomes 7 and BP = exp(1 - 7/6) while the
  // clipped matches stay put.
  const auto cand = words("the cat sat on the mat");
  const std::vector<Tokens> one = {words("the cat")};
  const std::vector<Tokens> two = {words("the cat"), words("x x x x x x x")};
  CHECK(bleu_stats(cand, one).matches == bleu_stats(cand, two).matches);
  CHECK(bleu_stats(cand, two).reference_length == 7);
  const double before = bleu(cand, one);
  const double after = bleu(cand, two);
  CHECK(after < before);
  CHECK(after == doctest::Approx(before * std::exp(1.0 - 7.0 / 6.0)).epsilon(1e-12));
  CHECK(after == doctest::Approx(scratch_bleu(cand, two)).epsilon(1e-12));
}

TEST_CASE("corpus bleu sums statistics") {
  const std::vector<std::string> cands = {"the cat sat on the mat", "x y z"};
  const std::vector<std::vector<std::string>> refs = {{"the cat sat on the mat"}, {"a b c"}};
  const auto r = corpus_bleu(cands, refs);
  CHECK(r.pairs == 2);
  CHECK(r.sentence_mean == doctest::Approx(0.5).epsilon(1e-12));
  // Summed: matches 6,5,4,3 of totals 9,7,5,3; c = r = 9.
  const double hand = std::pow(6.0 / 9 * 5.0 / 7 * 4.0 / 5 * 3.0 / 3, 0.25);
  CHECK(r.corpus == doctest::Approx(hand).epsilon(1e-12));
  CHECK(kind_of([&] { corpus_bleu({"a"}, {}); }) == "LengthMismatch");
}

TEST_CASE("CJK text is scored per character") {
  CHECK(bleu_tokens("检索 增强generation") == Tokens{"检", "索", "增", "强", "generation"});
  CHECK(bleu(bleu_tokens("机器翻译很难"), {bleu_tokens("机器翻译很难")}) == 1.0);
}

TEST_CASE("parallel corpora load from TSV and JSON lines") {
  const auto tsv = load_parallel(fixture("parallel.tsv"));
  REQUIRE(tsv.size() == 2);
  CHECK(tsv[1].references.size() == 2);
  const auto jl = load_parallel(fixture("parallel.jsonl"));
  REQUIRE(jl.size() == 2);
  CHECK(jl[0].references == std::vector<std::string>{"knowledge graph", "a knowledge graph"});
  TempDir dir;
  write_file(dir.path / "bad.tsv", "only source\n");
  CHECK(kind_of([&] { load_parallel(dir.path / "bad.tsv"); }) == "InvalidParallelCorpus");
  write_file(dir.path / "bad.jsonl", "{\"source\": \"a\", \"references\": []}\n");
  CHECK(kind_of([&] { load_parallel(dir.path / "bad.jsonl"); }) == "InvalidParallelCorpus");
}

TEST_CASE("reported criterion means give the reported task average") {
  auto recs = records(Task::kReading, Criterion::kFactuality, 17, 8);
  const auto info = records(Task::kReading, Criterion::kInformativeness, 9, 11);
  recs.insert(recs.end(), info.begin(), info.end());
  const auto by = aggregate_mos(recs, GroupBy::kCriterion);
  REQUIRE(by.size() == 2);
  CHECK(display_score(by.at("factuality")) == "4.68");
  CHECK(display_score(by.at("informativeness")) == "4.45");
  const double avg = task_average(recs, Task::kReading);
  CHECK(avg == doctest::Approx(4.565).epsilon(1e-12));
  CHECK(display_score(avg) == "4.57");
  // Record-weighted mean differs: 206 / 45.
  CHECK(aggregate_mos(recs, GroupBy::kTask).at("reading") == doctest::Approx(206.0 / 45.0).epsilon(1e-12));
  CHECK(kind_of([&] { task_average(recs, Task::kTranslation); }) == "EmptyGroup");
}

TEST_CASE("mos bounds, constants and brute-force means") {
  CHECK(kind_of([] { MosRecord(Task::kReading, Criterion::kFluency, "r", 6); }) == "InvalidMosRecord");
  CHECK(kind_of([] { MosRecord(Task::kReading, Criterion::kFluency, "r", 0); }) == "InvalidMosRecord");
  CHECK(kind_of([] { MosRecord(Task::kReading, Criterion::kFluency, "", 3); }) == "InvalidMosRecord");
  const auto fives = records(Task::kPolishing, Criterion::kAcademic, 7, 0);
  CHECK(display_score(aggregate_mos(fives, GroupBy::kCriterion).at("academic")) == "5.00");
  CHECK(aggregate_mos({}, GroupBy::kTask).empty());

  Rng rng(8);
  std::vector<MosRecord> recs;
  std::map<std::string, std::pair<long, long>> sums;
  for (int i = 0; i < 500; ++i) {
    const auto task = static_cast<Task>(rng.below(3));
    const auto crit = static_cast<Criterion>(rng.below(5));
    const int score = 1 + static_cast<int>(rng.below(5));
    recs.emplace_back(task, crit, "r" + std::to_string(i), score);
    auto& s = sums[std::string(to_string(crit))];
    s.first += score;
    s.second += 1;
  }
  const auto got = aggregate_mos(recs, GroupBy::kCriterion);
  REQUIRE(got.size() == sums.size());
  for (const auto& [k, s] : sums) CHECK(got.at(k) == static_cast<double>(s.first) / static_cast<double>(s.second));
}

TEST_CASE("display rounding is half-up") {
  CHECK(display_score(4.565) == "4.57");
  CHECK(display_score(4.575) == "4.58");
  CHECK(display_score(4.5649) == "4.56");
  CHECK(display_score(1.005) == "1.01");
  CHECK(display_score(5.0) == "5.00");
}

TEST_CASE("mos csv parsing") {
  const auto recs = parse_mos_csv("task,criterion,rater_id,score\nreading,factuality,a,5\ntranslation,fidelity,b,3\n");
  REQUIRE(recs.size() == 2);
  CHECK(recs[1].task() == Task::kTranslation);
  CHECK(recs[1].criterion() == Criterion::kFidelity);
  CHECK(kind_of([] { parse_mos_csv("task,criterion,rater_id,score\nreading,speed,a,5\n"); }) == "InvalidMosRecord");
  CHECK(kind_of([] { parse_mos_csv("task,criterion,rater_id,score\nreading,fluency,a,five\n"); }) ==
        "InvalidMosRecord");
}

TEST_CASE("sft export") {
  const auto one = export_sft_dataset({{"reading", "Q?", "A."}}, default_instruction);
  REQUIRE(one.records.size() == 1);
  CHECK_FALSE(one.records[0].instruction.empty());
  CHECK(one.records[0].input == "Q?");
  CHECK(one.records[0].output == "A.");

  const auto ts = load_transcripts(fixture("transcripts.jsonl"));
  REQUIRE(ts.size() == 5);
  const auto ex = export_sft_dataset(ts, default_instruction);
  CHECK(ex.records.size() == 4);
  CHECK(ex.dropped == 1);
  const auto jsonl = to_jsonl(ex.records);
  std::size_t lines = 0;
  for (char c : jsonl) lines += c == '\n';
  CHECK(lines == 4);
  check_golden("sft.jsonl", jsonl);

  CHECK(kind_of([] { export_sft_dataset({{"x", "p", "r"}}, [](const std::string&) { return std::string(); }); }) ==
        "InvalidSftRecord");
}
