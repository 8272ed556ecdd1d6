#include <algorithm>
#include <cmath>
#include <set>

#include "litpilot/corpus/text.hpp"
#include "litpilot/investigation/investigation.hpp"

namespace litpilot::investigation {
namespace {

bool all_digits(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string> keyword_terms(const corpus::PaperDocument& d) {
  std::vector<std::string> out;
  for (auto& t : corpus::terms(d.title + "\n" + d.abstract)) {
    if (!corpus::is_stopword(t) && !all_digits(t)) out.push_back(std::move(t));
  }
  return out;
}

nlohmann::ordered_json keywords_json(const std::vector<KeywordScore>& ks) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& k : ks) arr.push_back({{"term", k.term}, {"score", k.score}});
  return arr;
}

}  // namespace

double trend_slope(const std::map<int, std::size_t>& histogram) {
  if (histogram.size() < 2) return 0.0;
  const int lo = histogram.begin()->first;
  const int hi = histogram.rbegin()->first;
  const double n = static_cast<double>(hi - lo + 1);
  // Centered x keeps the sums small and exact for integer inputs.
  const double x_mean = (static_cast<double>(lo) + static_cast<double>(hi)) / 2.0;
  double y_sum = 0.0;
  for (const auto& [y, c] : histogram) y_sum += static_cast<double>(c);
  const double y_mean = y_sum / n;
  double sxy = 0.0, sxx = 0.0;
  for (int year = lo; year <= hi; ++year) {
    const auto it = histogram.find(year);
    const double c = it == histogram.end() ? 0.0 : static_cast<double>(it->second);
    const double dx = static_cast<double>(year) - x_mean;
    sxy += dx * (c - y_mean);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::vector<KeywordScore> top_keywords(const std::vector<corpus::PaperDocument>& papers,
                                       const std::vector<corpus::PaperDocument>& reference, std::size_t limit) {
  const auto& ref = reference.empty() ? papers : reference;
  std::map<std::string, std::size_t> df;
  for (const auto& d : ref) {
    const auto ts = keyword_terms(d);
    for (const auto& t : std::set<std::string>(ts.begin(), ts.end())) ++df[t];
  }
  std::map<std::string, std::size_t> tf;
  for (const auto& d : papers) {
    for (const auto& t : keyword_terms(d)) ++tf[t];
  }
  const double n = static_cast<double>(ref.size());
  std::vector<KeywordScore> out;
  for (const auto& [t, f] : tf) {
    const auto it = df.find(t);
    const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
    out.push_back({t, static_cast<double>(f) * (std::log((n + 1.0) / (d + 1.0)) + 1.0)});
  }
  std::sort(out.begin(), out.end(), [](const KeywordScore& a, const KeywordScore& b) {
    return a.score != b.score ? a.score > b.score : a.term < b.term;
  });
  if (out.size() > limit) out.resize(limit);
  return out;
}

SummaryStats compute_summary_stats(const std::vector<corpus::PaperDocument>& papers,
                                   const std::vector<corpus::PaperDocument>& reference) {
  SummaryStats s;
  s.paper_count = papers.size();
  std::optional<int> latest;
  for (const auto& p : papers) {
    if (!p.year) {
      ++s.undated_count;
      continue;
    }
    ++s.year_histogram[*p.year];
    latest = latest ? std::max(*latest, *p.year) : *p.year;
  }
  s.trend_slope = trend_slope(s.year_histogram);
  s.top_keywords = top_keywords(papers, reference);
  if (latest) {
    std::vector<corpus::PaperDocument> recent;
    for (const auto& p : papers) {
      if (p.year == latest) recent.push_back(p);
    }
    s.recent_keywords = top_keywords(recent, reference.empty() ? papers : reference);
  }
  return s;
}

nlohmann::ordered_json to_json(const SummaryStats& s) {
  nlohmann::ordered_json j;
  j["paper_count"] = s.paper_count;
  j["undated_count"] = s.undated_count;
  auto hist = nlohmann::ordered_json::object();
  for (const auto& [y, c] : s.year_histogram) hist[std::to_string(y)] = c;
  j["year_histogram"] = hist;
  j["trend_slope"] = s.trend_slope;
  j["top_keywords"] = keywords_json(s.top_keywords);
  j["recent_keywords"] = keywords_json(s.recent_keywords);
  return j;
}

}  // namespace litpilot::investigation
