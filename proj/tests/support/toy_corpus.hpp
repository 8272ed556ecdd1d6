#pragma once

// Three topics x twenty chunks. Each chunk is mostly generic academic filler
// with roughly one topical word in ten, and chunk lengths vary from 30 to 150
// words, so raw n-gram overlap is a weak signal. Questions are the first six
// words of their chunk.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "litpilot/embedding/contrastive.hpp"
#include "litpilot/embedding/features.hpp"
#include "litpilot/util/rng.hpp"

namespace litpilot::testing {

struct ToyCorpus {
  std::map<std::string, std::string> texts;
  std::vector<std::string> ids;
  std::vector<int> topic;
  std::vector<std::string> questions;
  std::vector<embedding::TrainingTriple> triples;

  embedding::TextResolver resolver() const {
    return [this](const std::string& id) { return texts.at(id); };
  }
};

inline std::vector<std::vector<std::size_t>> other_topic_candidates(const ToyCorpus& c, std::size_t per,
                                                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < c.ids.size(); ++j) {
      if (c.topic[j] != c.topic[i]) pool.push_back(j);
    }
    rng.shuffle(pool);
    pool.resize(per);
    out.push_back(pool);
  }
  return out;
}

inline ToyCorpus make_toy_corpus(std::uint64_t seed = 2024, std::size_t negatives = 20) {
  static const std::vector<std::string> kFiller = {
      "the",   "of",   "and",  "we",      "in",       "this",  "that",  "results", "method", "approach",
      "model", "data", "show", "using",   "based",    "proposed", "our", "is",      "are",    "for",
      "with",  "on",   "by",   "which",   "also",     "these", "paper", "study",   "analysis", "set",
      "used",  "can",  "two",  "new",     "each",     "from",  "as",    "an",      "be",     "it"};
  static const std::vector<std::vector<std::string>> kTopics = {
      {"protein", "folding", "residue", "amino", "enzyme", "molecular", "binding", "ligand", "peptide",
       "structure", "cell", "genome", "sequence", "mutation", "assay"},
      {"galaxy", "stellar", "redshift", "cosmic", "telescope", "luminosity", "orbit", "planet", "nebula",
       "spectrum", "dark", "halo", "supernova", "quasar", "photon"},
      {"contract", "court", "statute", "liability", "plaintiff", "judge", "ruling", "tort", "appeal",
       "jurisdiction", "verdict", "clause", "legal", "defendant", "counsel"}};

  ToyCorpus c;
  Rng rng(seed);
  for (int t = 0; t < 3; ++t) {
    for (int i = 0; i < 20; ++i) {
      const std::size_t n = 30 + rng.below(120);
      std::string text, question;
      for (std::size_t w = 0; w < n; ++w) {
        const auto& word = rng.uniform() < 0.9 ? kFiller[rng.below(kFiller.size())]
                                                : kTopics[t][rng.below(kTopics[t].size())];
        text += (w ? " " : "") + word;
        if (w < 6) question += (w ? " " : "") + word;
      }
      const std::string id = "t" + std::to_string(t) + "c" + std::to_string(i);
      c.texts[id] = text;
      c.ids.push_back(id);
      c.topic.push_back(t);
      c.questions.push_back(question);
    }
  }
  const auto negs = other_topic_candidates(c, negatives, seed + 1);
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    embedding::TrainingTriple t{c.questions[i], c.ids[i], {}};
    for (std::size_t j : negs[i]) t.negative_chunks.push_back(c.ids[j]);
    c.triples.push_back(std::move(t));
  }
  return c;
}

// Fraction of questions whose positive scores strictly above every candidate
// in its evaluation set.
template <typename Sim>
double recall_at_1(const ToyCorpus& c, const std::vector<std::vector<std::size_t>>& candidates, Sim sim) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < c.ids.size(); ++i) {
    const double sp = sim(c.questions[i], c.texts.at(c.ids[i]));
    bool top = true;
    for (std::size_t j : candidates[i]) top = top && sim(c.questions[i], c.texts.at(c.ids[j])) < sp;
    hits += top;
  }
  return static_cast<double>(hits) / static_cast<double>(c.ids.size());
}

inline double raw_feature_cosine(const std::string& a, const std::string& b) {
  const auto fa = embedding::featurize(a);
  const auto fb = embedding::featurize(b);
  double d = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [i, w] : fa.entries) na += w * w, d += w * fb.weight(i);
  for (const auto& [i, w] : fb.entries) nb += w * w;
  return d / std::sqrt(na * nb);
}

}  // namespace litpilot::testing
