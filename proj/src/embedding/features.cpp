#include "litpilot/embedding/features.hpp"

#include <algorithm>
#include <map>

#include "litpilot/util/utf8.hpp"

namespace litpilot::embedding {

double FeatureVector::weight(std::uint32_t index) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), index,
                                   [](const auto& e, std::uint32_t i) { return e.first < i; });
  return it != entries.end() && it->first == index ? it->second : 0.0;
}

std::string normalize_for_features(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = utf8::decode_at(text, pos);
    pos += d.len;
    if (utf8::is_space(d.cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    utf8::append(out, d.cp >= 'A' && d.cp <= 'Z' ? d.cp - 'A' + 'a' : d.cp);
  }
  return out;
}

FeatureVector featurize(std::string_view text) {
  const std::string norm = normalize_for_features(text);
  // Byte offsets of every code point boundary.
  std::vector<std::size_t> bounds;
  for (std::size_t pos = 0; pos < norm.size(); pos += utf8::decode_at(norm, pos).len) bounds.push_back(pos);
  bounds.push_back(norm.size());

  std::map<std::uint32_t, double> counts;
  const std::size_t cps = bounds.size() - 1;
  for (std::size_t n = 2; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= cps; ++i) {
      const std::string_view gram(norm.data() + bounds[i], bounds[i + n] - bounds[i]);
      counts[ngram_bucket(gram)] += 1.0;
    }
  }
  FeatureVector fv;
  fv.entries.assign(counts.begin(), counts.end());
  return fv;
}

}  // namespace litpilot::embedding
