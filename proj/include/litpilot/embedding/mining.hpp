#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "litpilot/corpus/chunker.hpp"
#include "litpilot/embedding/contrastive.hpp"
#include "litpilot/llm/backend.hpp"
#include "litpilot/llm/prompt.hpp"

namespace litpilot::embedding {

struct MiningResult {
  std::vector<TrainingTriple> triples;
  std::size_t dropped = 0;  // chunks whose generated question was empty
};

// One backend-generated question per chunk (template "triple_question"), the
// chunk as positive, and `negatives_per` chunks drawn uniformly without
// replacement from other documents. Negatives are drawn for every chunk in
// input order, so a dropped triple does not shift the samples of later ones.
//
// Throws InsufficientCorpus when some chunk has fewer than `negatives_per`
// chunks outside its document, InvalidHyperparameters when negatives_per is 0,
// and BackendFailure when a backend call fails.
MiningResult mine_triples(const std::vector<corpus::Chunk>& chunks, llm::Backend& backend,
                          const llm::PromptLibrary& prompts, std::size_t negatives_per, std::uint64_t seed);

}  // namespace litpilot::embedding
