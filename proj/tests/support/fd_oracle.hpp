#pragma once

// Finite-difference check of the InfoNCE gradient. The loss here is written
// directly from the definition with dense loops and shares no code with the
// library's loss beyond reading W.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "litpilot/embedding/contrastive.hpp"
#include "litpilot/embedding/features.hpp"
#include "litpilot/embedding/projection.hpp"
#include "litpilot/util/rng.hpp"
#include "support/generators.hpp"

namespace litpilot::testing {

inline double naive_info_nce(const embedding::ProjectionModel& m, const embedding::FeatureVector& q,
                             const embedding::FeatureVector& p, const std::vector<embedding::FeatureVector>& negs) {
  const auto unit = [&](const embedding::FeatureVector& f) {
    std::vector<double> v(m.d_out(), 0.0);
    for (std::size_t r = 0; r < m.d_out(); ++r) {
      for (const auto& [c, w] : f.entries) v[r] += m.weight(r, c) * w;
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
  };
  const auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double tau = m.temperature();
  const auto eq = unit(q);
  const double num = std::exp(cos(eq, unit(p)) / tau);
  double den = num;
  for (const auto& n : negs) den += std::exp(cos(eq, unit(n)) / tau);
  return -std::log(num / den);
}

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor), over every W entry
// in a column touched by the triple plus a sample of untouched columns.
inline FdReport finite_difference_check(embedding::ProjectionModel& m, const embedding::FeatureVector& q,
                                        const embedding::FeatureVector& p,
                                        const std::vector<embedding::FeatureVector>& negs, double h = 1e-5,
                                        double floor = 1e-6) {
  const auto analytic = embedding::info_nce(m, q, p, negs).gradient;
  std::set<std::uint32_t> cols;
  for (const auto* f : {&q, &p}) {
    for (const auto& e : f->entries) cols.insert(e.first);
  }
  for (const auto& n : negs) {
    for (const auto& e : n.entries) cols.insert(e.first);
  }
  // A few columns no text touches; their gradient must be zero.
  for (std::uint32_t c : {0u, 4097u, embedding::kFeatureDim - 1}) cols.insert(c);

  FdReport report;
  for (std::uint32_t c : cols) {
    for (std::size_t r = 0; r < m.d_out(); ++r) {
      const double w0 = m.weight(r, c);
      m.set_weight(r, c, w0 + h);
      const double up = naive_info_nce(m, q, p, negs);
      m.set_weight(r, c, w0 - h);
      const double down = naive_info_nce(m, q, p, negs);
      m.set_weight(r, c, w0);
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.at(r, c);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.entries_checked;
    }
  }
  return report;
}

// Seeded case i: small random model and a triple of short random texts.
inline FdReport run_fd_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d_out = 8 + rng.below(9);
  const double taus[] = {0.05, 0.1, 0.5, 1.0};
  const double tau = taus[rng.below(4)];
  auto model = embedding::ProjectionModel::initialize(d_out, tau, seed);
  const auto text = [&] {
    std::string s;
    const std::size_t words = 2 + rng.below(5);
    for (std::size_t i = 0; i < words; ++i) s += (i ? " " : "") + word_pool()[rng.below(word_pool().size())];
    return s;
  };
  const auto q = embedding::featurize(text());
  const auto p = embedding::featurize(text());
  std::vector<embedding::FeatureVector> negs;
  const std::size_t k = 1 + rng.below(4);
  for (std::size_t i = 0; i < k; ++i) negs.push_back(embedding::featurize(text()));
  return finite_difference_check(model, q, p, negs);
}

}  // namespace litpilot::testing
