#include "litpilot/embedding/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "litpilot/error.hpp"
#include "litpilot/util/rng.hpp"

namespace litpilot::embedding {
namespace {

struct Normalized {
  std::vector<double> unit;
  double norm = 0.0;
};

Normalized project_normalized(const ProjectionModel& model, const FeatureVector& f) {
  if (f.empty()) throw invalid_input("EmptyInput", "text has no character n-grams");
  Normalized n{model.project(f), 0.0};
  n.norm = std::sqrt(dot(n.unit, n.unit));
  if (!(n.norm > 0.0) || !std::isfinite(n.norm)) {
    throw Error("DegenerateProjection", ErrorCategory::kInternal, "projection of the input is the zero vector");
  }
  for (double& x : n.unit) x /= n.norm;
  return n;
}

// loss = log(1 + sum_i exp(d_i)) with d_i = (s_i - s_p)/tau, evaluated without overflow.
double contrastive_loss(std::span<const double> diffs) {
  const double m = std::max(0.0, *std::max_element(diffs.begin(), diffs.end()));
  if (m == 0.0) {
    double s = 0.0;
    for (double d : diffs) s += std::exp(d);
    return std::log1p(s);
  }
  double s = std::exp(-m);
  for (double d : diffs) s += std::exp(d - m);
  return m + std::log(s);
}

// Adds (g - (g.e)e)/|u| outer f into `grad`.
void accumulate(ProjectionGradient& grad, const Normalized& n, std::span<const double> g, const FeatureVector& f) {
  const double ge = dot(g, n.unit);
  std::vector<double> du(g.size());
  for (std::size_t r = 0; r < g.size(); ++r) du[r] = (g[r] - ge * n.unit[r]) / n.norm;
  for (const auto& [index, w] : f.entries) {
    auto& col = grad.columns[index];
    if (col.empty()) col.assign(grad.d_out, 0.0);
    for (std::size_t r = 0; r < grad.d_out; ++r) col[r] += w * du[r];
  }
}

void check_resolvable(const TrainingTriple& t, const TextResolver& texts, std::vector<std::string>& out) {
  out.clear();
  out.push_back(texts(t.positive_chunk));
  for (const auto& id : t.negative_chunks) out.push_back(texts(id));
}

}  // namespace

void TrainingTriple::validate() const {
  if (negative_chunks.empty()) throw invalid_input("InvalidTriple", "at least one negative chunk is required");
  std::set<std::string> seen;
  for (const auto& n : negative_chunks) {
    if (n == positive_chunk) throw invalid_input("InvalidTriple", "positive chunk listed as a negative");
    if (!seen.insert(n).second) throw invalid_input("InvalidTriple", "duplicate negative chunk " + n);
  }
}

nlohmann::ordered_json to_json(const TrainingTriple& t) {
  nlohmann::ordered_json j;
  j["question"] = t.question;
  j["positive_chunk"] = t.positive_chunk;
  j["negative_chunks"] = t.negative_chunks;
  return j;
}

TrainingTriple triple_from_json(const nlohmann::json& j) {
  TrainingTriple t;
  try {
    t.question = j.at("question").get<std::string>();
    t.positive_chunk = j.at("positive_chunk").get<std::string>();
    t.negative_chunks = j.at("negative_chunks").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidTriple", e.what());
  }
  t.validate();
  return t;
}

double ProjectionGradient::at(std::size_t row, std::uint32_t col) const {
  const auto it = columns.find(col);
  return it == columns.end() ? 0.0 : it->second.at(row);
}

bool ProjectionGradient::all_finite() const {
  for (const auto& [c, col] : columns) {
    for (double v : col) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double info_nce_loss(const ProjectionModel& model, const FeatureVector& question, const FeatureVector& positive,
                     std::span<const FeatureVector> negatives) {
  const auto q = project_normalized(model, question);
  const auto p = project_normalized(model, positive);
  const double tau = model.temperature();
  const double sp = dot(q.unit, p.unit);
  std::vector<double> diffs;
  for (const auto& nf : negatives) diffs.push_back((dot(q.unit, project_normalized(model, nf).unit) - sp) / tau);
  return std::max(0.0, contrastive_loss(diffs));
}

LossAndGradient info_nce(const ProjectionModel& model, const FeatureVector& question, const FeatureVector& positive,
                         std::span<const FeatureVector> negatives) {
  if (negatives.empty()) throw invalid_input("InvalidTriple", "at least one negative chunk is required");
  const double tau = model.temperature();
  const std::size_t d = model.d_out();

  const auto q = project_normalized(model, question);
  std::vector<Normalized> cands;
  cands.push_back(project_normalized(model, positive));
  for (const auto& nf : negatives) cands.push_back(project_normalized(model, nf));

  std::vector<double> sims(cands.size());
  for (std::size_t c = 0; c < cands.size(); ++c) sims[c] = dot(q.unit, cands[c].unit);
  std::vector<double> diffs(cands.size() - 1);
  for (std::size_t i = 1; i < cands.size(); ++i) diffs[i - 1] = (sims[i] - sims[0]) / tau;

  LossAndGradient out;
  const double raw_loss = contrastive_loss(diffs);
  out.loss = std::max(0.0, raw_loss);

  // Softmax over candidates: p_0 = exp(-loss), p_i = exp(d_i - loss).
  std::vector<double> dl_ds(cands.size());
  dl_ds[0] = (std::exp(-raw_loss) - 1.0) / tau;
  for (std::size_t i = 1; i < cands.size(); ++i) dl_ds[i] = std::exp(diffs[i - 1] - raw_loss) / tau;

  std::vector<double> g_q(d, 0.0);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    for (std::size_t r = 0; r < d; ++r) g_q[r] += dl_ds[c] * cands[c].unit[r];
  }

  out.gradient.d_out = d;
  accumulate(out.gradient, q, g_q, question);
  std::vector<double> g_c(d);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    for (std::size_t r = 0; r < d; ++r) g_c[r] = dl_ds[c] * q.unit[r];
    accumulate(out.gradient, cands[c], g_c, c == 0 ? positive : negatives[c - 1]);
  }
  return out;
}

LossAndGradient info_nce(const ProjectionModel& model, const TrainingTriple& triple, const TextResolver& texts) {
  triple.validate();
  std::vector<std::string> resolved;
  check_resolvable(triple, texts, resolved);
  std::vector<FeatureVector> negs;
  for (std::size_t i = 1; i < resolved.size(); ++i) negs.push_back(featurize(resolved[i]));
  return info_nce(model, featurize(triple.question), featurize(resolved[0]), negs);
}

void TrainingConfig::validate() const {
  if (d_out == 0 || batch == 0 || !(temperature > 0.0) || !(learning_rate > 0.0)) {
    throw invalid_input("InvalidHyperparameters", "d_out, batch, temperature and learning_rate must be positive");
  }
}

namespace {

struct FeaturizedTriple {
  FeatureVector question;
  FeatureVector positive;
  std::vector<FeatureVector> negatives;
};

std::vector<FeaturizedTriple> featurize_all(const std::vector<TrainingTriple>& triples, const TextResolver& texts) {
  std::unordered_map<std::string, FeatureVector> cache;
  const auto chunk_features = [&](const std::string& id) -> const FeatureVector& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, featurize(texts(id))).first;
    return it->second;
  };
  std::vector<FeaturizedTriple> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    t.validate();
    FeaturizedTriple ft{featurize(t.question), chunk_features(t.positive_chunk), {}};
    for (const auto& n : t.negative_chunks) ft.negatives.push_back(chunk_features(n));
    out.push_back(std::move(ft));
  }
  return out;
}

double mean_featurized_loss(const ProjectionModel& model, const std::vector<FeaturizedTriple>& triples) {
  double sum = 0.0;
  for (const auto& t : triples) sum += info_nce_loss(model, t.question, t.positive, t.negatives);
  return triples.empty() ? 0.0 : sum / static_cast<double>(triples.size());
}

}  // namespace

double mean_loss(const ProjectionModel& model, const std::vector<TrainingTriple>& triples, const TextResolver& texts) {
  return mean_featurized_loss(model, featurize_all(triples, texts));
}

TrainingResult train_projection(const std::vector<TrainingTriple>& triples, const TextResolver& texts,
                                const TrainingConfig& config) {
  config.validate();
  if (triples.empty()) throw invalid_input("InvalidTrainingSet", "no training triples");
  const auto data = featurize_all(triples, texts);

  TrainingResult result{ProjectionModel::initialize(config.d_out, config.temperature, config.seed), 0.0, {}};
  ProjectionModel& model = result.model;
  result.initial_mean_loss = mean_featurized_loss(model, data);

  Rng order_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      ProjectionGradient batch_grad{config.d_out, {}};
      for (std::size_t k = start; k < end; ++k) {
        const auto& t = data[order[k]];
        auto lg = info_nce(model, t.question, t.positive, t.negatives);
        if (!std::isfinite(lg.loss) || !lg.gradient.all_finite()) {
          throw Error("NonFiniteLoss", ErrorCategory::kInternal,
                      "non-finite loss or gradient in epoch " + std::to_string(epoch));
        }
        epoch_loss += lg.loss;
        for (auto& [col, g] : lg.gradient.columns) {
          auto& acc = batch_grad.columns[col];
          if (acc.empty()) acc.assign(config.d_out, 0.0);
          for (std::size_t r = 0; r < config.d_out; ++r) acc[r] += g[r];
        }
      }
      const double scale = config.learning_rate / static_cast<double>(end - start);
      for (const auto& [col, g] : batch_grad.columns) {
        auto w = model.mutable_column(col);
        for (std::size_t r = 0; r < config.d_out; ++r) w[r] -= scale * g[r];
      }
    }
    const double mean = epoch_loss / static_cast<double>(data.size());
    if (!std::isfinite(mean)) {
      throw Error("NonFiniteLoss", ErrorCategory::kInternal, "non-finite mean loss in epoch " + std::to_string(epoch));
    }
    result.epoch_mean_loss.push_back(mean);
  }
  return result;
}

}  // namespace litpilot::embedding
