#include <cassert>
#include <cmath>

#include "litpilot/error.hpp"
#include "litpilot/investigation/investigation.hpp"
#include "litpilot/util/rng.hpp"

namespace litpilot::investigation {
namespace {

constexpr std::size_t kMaxIterations = 100;
constexpr std::size_t kRestarts = 10;

using Vec = std::vector<double>;

double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Normalized sum of the members; nullopt when the sum is the zero vector.
std::optional<Vec> unit_mean(const std::vector<const Vec*>& members, std::size_t dim) {
  Vec sum(dim, 0.0);
  for (const auto* m : members) {
    for (std::size_t i = 0; i < dim; ++i) sum[i] += (*m)[i];
  }
  double norm = 0.0;
  for (double v : sum) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) return std::nullopt;
  for (double& v : sum) v /= norm;
  return sum;
}

std::vector<Vec> seed_centroids(const std::vector<const Vec*>& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Vec> centers;
  std::vector<bool> chosen(n, false);
  const auto take = [&](std::size_t i) {
    chosen[i] = true;
    centers.push_back(*points[i]);
  };
  take(rng.below(n));
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_dist(*points[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c) best = std::min(best, sq_dist(*points[i], centers[c]));
      d2[i] = chosen[i] ? 0.0 : best;
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc > r) break;
      }
    } else {
      // Every remaining point coincides with a center.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    take(pick);
  }
  return centers;
}

}  // namespace

double assignment_objective(const std::vector<embedding::EmbeddingVector>& points,
                            const std::vector<std::size_t>& labels, std::size_t k) {
  if (points.empty()) return 0.0;
  const std::size_t dim = points[0].dim();
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<const Vec*> members;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (labels[i] == c) members.push_back(&points[i].values);
    }
    if (members.empty()) continue;
    const auto centroid = unit_mean(members, dim);
    if (!centroid) {
      // Any unit centroid is optimal when the members cancel out.
      Vec e(dim, 0.0);
      e[0] = 1.0;
      for (const auto* m : members) total += sq_dist(*m, e);
      continue;
    }
    for (const auto* m : members) total += sq_dist(*m, *centroid);
  }
  return total;
}

namespace {

// One k-means++ seeding followed by Lloyd iterations.
struct Run {
  std::vector<std::size_t> labels;
  std::vector<Vec> centroids;
  std::vector<double> trace;
};

Run lloyd(const std::vector<const Vec*>& points, std::size_t k, std::size_t dim, Rng& rng) {
  const std::size_t n = points.size();
  auto centroids = seed_centroids(points, k, rng);
  std::vector<std::size_t> labels(n, k);  // k = unassigned
  Run out;

  for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
    std::vector<std::size_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(*points[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(*points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      next[i] = best;
    }

    // Repair empty clusters from the largest one.
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> sizes(k, 0);
      for (auto l : next) ++sizes[l];
      if (sizes[c] > 0) continue;
      std::size_t largest = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (sizes[j] > sizes[largest]) largest = j;
      }
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (next[i] != largest) continue;
        const double d = sq_dist(*points[i], centroids[largest]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next[far] = c;
      centroids[c] = *points[far];
    }

    const bool stable = next == labels;
    labels = std::move(next);
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<const Vec*> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == c) members.push_back(points[i]);
      }
      if (auto m = unit_mean(members, dim)) centroids[c] = std::move(*m);
    }
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) objective += sq_dist(*points[i], centroids[labels[i]]);
    assert(out.trace.empty() || objective <= out.trace.back() + 1e-9);
    out.trace.push_back(objective);
    if (stable) break;
  }

  out.labels = std::move(labels);
  out.centroids = std::move(centroids);
  return out;
}

}  // namespace

ClusterAssignment cluster_papers(const std::map<std::string, embedding::EmbeddingVector>& vectors, std::size_t k,
                                 std::uint64_t seed) {
  const std::size_t n = vectors.size();
  if (k < 1 || k > n) {
    throw invalid_input("InvalidK", "k = " + std::to_string(k) + " for " + std::to_string(n) + " points");
  }
  std::vector<std::string> ids;
  std::vector<const Vec*> points;
  for (const auto& [id, v] : vectors) {
    ids.push_back(id);
    points.push_back(&v.values);
  }
  const std::size_t dim = points[0]->size();
  for (const auto* p : points) {
    if (p->size() != dim) throw invalid_input("DimensionMismatch", "cluster inputs differ in dimension");
  }

  // Restarts from fresh seedings keep the best run; a single Lloyd descent
  // often stops in a poor local optimum on small inputs.
  Rng rng(seed);
  Run best;
  for (std::size_t r = 0; r < kRestarts; ++r) {
    auto run = lloyd(points, k, dim, rng);
    if (best.trace.empty() || run.trace.back() < best.trace.back()) best = std::move(run);
  }
  ClusterAssignment out;
  out.k = k;
  out.objective_trace = std::move(best.trace);
  out.iterations = out.objective_trace.size();
  out.objective = out.objective_trace.back();
  for (std::size_t i = 0; i < n; ++i) out.labels[ids[i]] = best.labels[i];
  for (auto& c : best.centroids) out.centroids.push_back({std::move(c)});
  return out;
}

}  // namespace litpilot::investigation
