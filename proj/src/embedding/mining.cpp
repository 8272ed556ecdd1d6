#include "litpilot/embedding/mining.hpp"

#include <map>
#include <set>

#include "litpilot/error.hpp"
#include "litpilot/util/rng.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::embedding {

MiningResult mine_triples(const std::vector<corpus::Chunk>& chunks, llm::Backend& backend,
                          const llm::PromptLibrary& prompts, std::size_t negatives_per, std::uint64_t seed) {
  if (negatives_per == 0) throw invalid_input("InvalidHyperparameters", "negatives_per must be at least 1");
  std::map<std::string, std::size_t> per_doc;
  for (const auto& c : chunks) ++per_doc[c.doc_id];
  if (per_doc.size() < 2 || chunks.size() < negatives_per + 1) {
    throw domain_rule("InsufficientCorpus", "need at least " + std::to_string(negatives_per + 1) +
                                                " chunks from at least 2 documents");
  }
  for (const auto& [doc, n] : per_doc) {
    if (chunks.size() - n < negatives_per) {
      throw domain_rule("InsufficientCorpus", "document " + doc + " has only " + std::to_string(chunks.size() - n) +
                                                  " chunks in other documents");
    }
  }

  Rng rng(seed);
  MiningResult out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < chunks.size(); ++j) {
      if (chunks[j].doc_id != chunks[i].doc_id) pool.push_back(j);
    }
    // Partial Fisher-Yates: the first negatives_per slots are a uniform sample.
    for (std::size_t s = 0; s < negatives_per; ++s) std::swap(pool[s], pool[s + rng.below(pool.size() - s)]);

    std::string question;
    try {
      question = llm::ask(backend, prompts.render("triple_question", {{"passage", chunks[i].text}}), 256);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::kBackend && e.category() != ErrorCategory::kTimeout) throw;
      throw backend_error("BackendFailure", e.what());
    }
    question = std::string(utf8::trim(question));
    if (question.empty()) {
      ++out.dropped;
      continue;
    }
    TrainingTriple t{std::move(question), chunks[i].chunk_id, {}};
    for (std::size_t s = 0; s < negatives_per; ++s) t.negative_chunks.push_back(chunks[pool[s]].chunk_id);
    out.triples.push_back(std::move(t));
  }
  return out;
}

}  // namespace litpilot::embedding
