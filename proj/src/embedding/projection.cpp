#include "litpilot/embedding/projection.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "litpilot/error.hpp"
#include "litpilot/util/rng.hpp"

namespace litpilot::embedding {
namespace {

constexpr std::string_view kMagic = "LITPILOT-PROJ v1";

void put_f32_le(unsigned char* bytes, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
}

float read_f32_le(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ProjectionModel::ProjectionModel(std::size_t d_out, double temperature, std::uint64_t seed)
    : d_out_(d_out), temperature_(temperature), seed_(seed), columns_(kFeatureDim) {
  if (d_out == 0) throw invalid_input("InvalidModel", "d_out must be positive");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw invalid_input("InvalidModel", "temperature must be positive");
  }
}

ProjectionModel ProjectionModel::initialize(std::size_t d_out, double temperature, std::uint64_t seed) {
  ProjectionModel model(d_out, temperature, seed);
  for (auto& col : model.columns_) col.assign(d_out, 0.0);
  const double a = std::sqrt(6.0 / static_cast<double>(kFeatureDim + d_out));
  Rng rng(seed);
  for (std::size_t r = 0; r < d_out; ++r) {
    for (std::uint32_t c = 0; c < kFeatureDim; ++c) model.columns_[c][r] = rng.uniform(-a, a);
  }
  return model;
}

double ProjectionModel::weight(std::size_t row, std::uint32_t col) const {
  const auto& c = columns_.at(col);
  return c.empty() ? 0.0 : c.at(row);
}

void ProjectionModel::set_weight(std::size_t row, std::uint32_t col, double value) {
  mutable_column(col)[row] = value;
}

std::span<const double> ProjectionModel::column(std::uint32_t col) const { return columns_.at(col); }

std::span<double> ProjectionModel::mutable_column(std::uint32_t col) {
  auto& c = columns_.at(col);
  if (c.empty()) c.assign(d_out_, 0.0);
  return c;
}

std::vector<double> ProjectionModel::project(const FeatureVector& features) const {
  std::vector<double> out(d_out_, 0.0);
  for (const auto& [index, w] : features.entries) {
    const auto& col = columns_[index];
    if (col.empty()) continue;
    for (std::size_t r = 0; r < d_out_; ++r) out[r] += w * col[r];
  }
  return out;
}

bool ProjectionModel::all_finite() const {
  for (const auto& col : columns_) {
    for (double v : col) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool ProjectionModel::operator==(const ProjectionModel& other) const {
  if (d_out_ != other.d_out_ || temperature_ != other.temperature_ || seed_ != other.seed_) return false;
  for (std::uint32_t c = 0; c < kFeatureDim; ++c) {
    const auto& a = columns_[c];
    const auto& b = other.columns_[c];
    if (a.empty() != b.empty()) {
      // An allocated all-zero column equals an unallocated one.
      for (double v : a.empty() ? b : a) {
        if (v != 0.0) return false;
      }
      continue;
    }
    if (a != b) return false;
  }
  return true;
}

void ProjectionModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write model file " + path.string());
  char tau[64];
  std::snprintf(tau, sizeof tau, "%.17g", temperature_);
  out << kMagic << " d_out=" << d_out_ << " tau=" << tau << " seed=" << seed_ << "\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(kFeatureDim) * 4);
  for (std::size_t r = 0; r < d_out_; ++r) {
    for (std::uint32_t c = 0; c < kFeatureDim; ++c) {
      const auto& col = columns_[c];
      put_f32_le(&row[c * 4], col.empty() ? 0.0f : static_cast<float>(col[r]));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw io_error("short write to model file " + path.string());
}

ProjectionModel ProjectionModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open model file " + path.string());
  std::string header;
  std::getline(in, header);
  if (header.rfind(kMagic, 0) != 0) throw invalid_input("InvalidModelFile", "bad header in " + path.string());
  std::size_t d_out = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  std::istringstream fields(header.substr(kMagic.size()));
  std::string field;
  bool got_d = false, got_tau = false, got_seed = false;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (key == "d_out") d_out = std::stoul(value), got_d = true;
      else if (key == "tau") tau = std::stod(value), got_tau = true;
      else if (key == "seed") seed = std::stoull(value), got_seed = true;
    } catch (const std::exception&) {
      throw invalid_input("InvalidModelFile", "bad header field '" + field + "'");
    }
  }
  if (!got_d || !got_tau || !got_seed) throw invalid_input("InvalidModelFile", "incomplete header");

  ProjectionModel model(d_out, tau, seed);
  std::vector<unsigned char> buf(static_cast<std::size_t>(kFeatureDim) * 4);
  for (auto& col : model.columns_) col.assign(d_out, 0.0);
  for (std::size_t r = 0; r < d_out; ++r) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw invalid_input("InvalidModelFile", "truncated weight matrix in " + path.string());
    }
    for (std::uint32_t c = 0; c < kFeatureDim; ++c) model.columns_[c][r] = read_f32_le(&buf[c * 4]);
  }
  return model;
}

EmbeddingVector embed_features(const FeatureVector& features, const ProjectionModel& model) {
  if (features.empty()) throw invalid_input("EmptyInput", "text has no character n-grams");
  EmbeddingVector v{model.project(features)};
  const double norm = std::sqrt(dot(v.values, v.values));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error("DegenerateProjection", ErrorCategory::kInternal, "projection of the input is the zero vector");
  }
  for (double& x : v.values) x /= norm;
  return v;
}

EmbeddingVector embed(std::string_view text, const ProjectionModel& model) {
  return embed_features(featurize(text), model);
}

}  // namespace litpilot::embedding
