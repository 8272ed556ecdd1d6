#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "litpilot/embedding/projection.hpp"

namespace litpilot::embedding {

// (question, positive chunk, negative chunks) contrastive training unit.
struct TrainingTriple {
  std::string question;
  std::string positive_chunk;
  std::vector<std::string> negative_chunks;

  // Throws InvalidTriple: negatives nonempty, pairwise distinct, and never the positive.
  void validate() const;
  bool operator==(const TrainingTriple&) const = default;
};

nlohmann::ordered_json to_json(const TrainingTriple& t);
TrainingTriple triple_from_json(const nlohmann::json& j);

// Maps a chunk id to its text; throws when the id is unknown.
using TextResolver = std::function<std::string(const std::string& chunk_id)>;

// dLoss/dW restricted to the columns of features that occur in the triple;
// every other entry is zero.
struct ProjectionGradient {
  std::size_t d_out = 0;
  std::map<std::uint32_t, std::vector<double>> columns;

  double at(std::size_t row, std::uint32_t col) const;
  bool all_finite() const;
};

struct LossAndGradient {
  double loss = 0.0;
  ProjectionGradient gradient;
};

// InfoNCE with cosine similarity and temperature tau:
//   loss = -log( exp(s_p/tau) / (exp(s_p/tau) + sum_i exp(s_i/tau)) )
// and its exact gradient with respect to W through the L2 normalization.
LossAndGradient info_nce(const ProjectionModel& model, const FeatureVector& question,
                         const FeatureVector& positive, std::span<const FeatureVector> negatives);

LossAndGradient info_nce(const ProjectionModel& model, const TrainingTriple& triple, const TextResolver& texts);

double info_nce_loss(const ProjectionModel& model, const FeatureVector& question, const FeatureVector& positive,
                     std::span<const FeatureVector> negatives);

struct TrainingConfig {
  std::size_t d_out = 256;
  double temperature = 0.05;
  double learning_rate = 0.1;
  std::size_t epochs = 10;
  std::size_t batch = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingResult {
  ProjectionModel model;
  double initial_mean_loss = 0.0;
  std::vector<double> epoch_mean_loss;
};

// Mini-batch gradient descent on the mean InfoNCE loss. The triple order is
// reshuffled each epoch from the seed; runs are bit-reproducible for a fixed
// seed on one platform. Throws NonFiniteLoss naming the epoch.
TrainingResult train_projection(const std::vector<TrainingTriple>& triples, const TextResolver& texts,
                                const TrainingConfig& config);

double mean_loss(const ProjectionModel& model, const std::vector<TrainingTriple>& triples,
                 const TextResolver& texts);

}  // namespace litpilot::embedding
