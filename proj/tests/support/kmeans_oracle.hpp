#pragma once

// Brute-force k-means objective and optimum over every labelling, plus the
// eight-point fixture.

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "litpilot/embedding/projection.hpp"
#include "litpilot/util/rng.hpp"

namespace litpilot::testing {

using embedding::EmbeddingVector;

// Sum over clusters of (2 |C| - 2 |sum of members|): the squared-distance
// objective with each centroid at the normalized member sum.
inline double oracle_objective(const std::vector<EmbeddingVector>& pts, const std::vector<std::size_t>& labels,
                               std::size_t k) {
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> sum(pts[0].dim(), 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (labels[i] != c) continue;
      ++n;
      for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += pts[i].values[d];
    }
    double norm = 0.0;
    for (double v : sum) norm += v * v;
    total += 2.0 * static_cast<double>(n) - 2.0 * std::sqrt(norm);
  }
  return total;
}

inline double exhaustive_optimum(const std::vector<EmbeddingVector>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= k;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> labels(n);
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = c % k;
      c /= k;
    }
    best = std::min(best, oracle_objective(pts, labels, k));
  }
  return best;
}

inline EmbeddingVector unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return {v};
}

// Eight points around three directions in 4-d.
inline std::map<std::string, EmbeddingVector> eight_points(std::uint64_t seed) {
  const std::vector<std::vector<double>> centers = {{1, 0, 0, 0.2}, {0, 1, 0.1, 0}, {0, 0.2, 1, 0.3}};
  Rng rng(seed);
  std::map<std::string, EmbeddingVector> out;
  for (int i = 0; i < 8; ++i) {
    auto v = centers[static_cast<std::size_t>(i) % 3];
    for (double& x : v) x += rng.uniform(-0.35, 0.35);
    out["p" + std::to_string(i)] = unit(v);
  }
  return out;
}

}  // namespace litpilot::testing
