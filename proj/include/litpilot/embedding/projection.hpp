#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "litpilot/embedding/features.hpp"

namespace litpilot::embedding {

// Dense unit-norm retrieval vector.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);

// Linear map W (d_out x 2^15) from hashed features to embeddings, plus the
// softmax temperature used when training it.
//
// Storage is column-major, one column per feature bucket. A column may be
// unallocated, in which case it is all zeros; this keeps very wide but sparse
// matrices (e.g. an identity over a few buckets) affordable.
class ProjectionModel {
 public:
  // Zero matrix.
  ProjectionModel(std::size_t d_out, double temperature, std::uint64_t seed);

  // W ~ uniform(-a, a) with a = sqrt(6 / (2^15 + d_out)), drawn row-major.
  static ProjectionModel initialize(std::size_t d_out, double temperature, std::uint64_t seed);

  std::size_t d_out() const noexcept { return d_out_; }
  double temperature() const noexcept { return temperature_; }
  std::uint64_t seed() const noexcept { return seed_; }

  double weight(std::size_t row, std::uint32_t col) const;
  void set_weight(std::size_t row, std::uint32_t col, double value);

  // Empty span for an unallocated (zero) column.
  std::span<const double> column(std::uint32_t col) const;
  std::span<double> mutable_column(std::uint32_t col);

  // W · f
  std::vector<double> project(const FeatureVector& features) const;

  bool all_finite() const;
  bool operator==(const ProjectionModel& other) const;

  // "LITPILOT-PROJ v1 d_out=<n> tau=<t> seed=<s>\n" then W row-major as
  // little-endian float32.
  void save(const std::filesystem::path& path) const;
  static ProjectionModel load(const std::filesystem::path& path);

 private:
  std::size_t d_out_;
  double temperature_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> columns_;
};

// normalize(W · featurize(text)). Throws EmptyInput when the text has no
// n-grams and DegenerateProjection when W · f is the zero vector.
EmbeddingVector embed(std::string_view text, const ProjectionModel& model);
EmbeddingVector embed_features(const FeatureVector& features, const ProjectionModel& model);

}  // namespace litpilot::embedding
