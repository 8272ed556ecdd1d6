#include "litpilot/evalkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::evalkit {
namespace {

using Ngrams = std::map<std::vector<std::string>, std::size_t>;

Ngrams ngram_counts(const Tokens& t, std::size_t n) {
  Ngrams out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i),
                                                               t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto p = s.find(sep, pos);
    out.push_back(s.substr(pos, p == std::string::npos ? std::string::npos : p - pos));
    if (p == std::string::npos) return out;
    pos = p + 1;
  }
}

Error bad_record(const std::string& detail) { return invalid_input("InvalidMosRecord", detail); }

}  // namespace

Tokens bleu_tokens(std::string_view text) { return corpus::tokenize(text); }

BleuStats bleu_stats(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t max_n) {
  if (references.empty()) throw invalid_input("EmptyReferences", "at least one reference is required");
  if (max_n == 0) throw invalid_input("InvalidMaxN", "max_n must be at least 1");
  BleuStats s;
  s.candidate_length = candidate.size();
  s.reference_length = references[0].size();
  for (const auto& r : references) {
    const auto d = [&](std::size_t len) { return len > s.candidate_length ? len - s.candidate_length : s.candidate_length - len; };
    if (d(r.size()) < d(s.reference_length) || (d(r.size()) == d(s.reference_length) && r.size() < s.reference_length)) {
      s.reference_length = r.size();
    }
  }
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = ngram_counts(candidate, n);
    Ngrams max_ref;
    for (const auto& r : references) {
      for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    std::size_t matched = 0;
    for (const auto& [g, c] : cand) {
      const auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    s.matches.push_back(matched);
    s.totals.push_back(candidate.size() >= n ? candidate.size() - n + 1 : 0);
  }
  return s;
}

double brevity_penalty(std::size_t c, std::size_t r) {
  if (c > r) return 1.0;
  if (c == 0) return 0.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

double bleu_from_stats(const BleuStats& s) {
  if (s.candidate_length == 0 || s.matches.empty() || s.matches[0] == 0) return 0.0;
  const double max_n = static_cast<double>(s.matches.size());
  double log_sum = 0.0;
  for (std::size_t i = 0; i < s.matches.size(); ++i) {
    double p;
    if (s.matches[i] > 0) {
      p = static_cast<double>(s.matches[i]) / static_cast<double>(s.totals[i]);
    } else {
      p = 1.0 / (2.0 * static_cast<double>(std::max<std::size_t>(s.totals[i], 1)));
    }
    log_sum += std::log(p) / max_n;
  }
  return brevity_penalty(s.candidate_length, s.reference_length) * std::exp(log_sum);
}

double bleu(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t max_n) {
  return bleu_from_stats(bleu_stats(candidate, references, max_n));
}

std::vector<ParallelPair> load_parallel(const std::filesystem::path& path) {
  const auto text = read_all(path);
  std::vector<ParallelPair> out;
  std::size_t lineno = 0;
  const bool jsonl = path.extension() == ".jsonl";
  for (const auto& line : lines_of(text)) {
    ++lineno;
    if (utf8::trim(line).empty()) continue;
    ParallelPair p;
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (jsonl) {
      try {
        const auto j = nlohmann::json::parse(line);
        p.source = j.at("source").get<std::string>();
        p.references = j.at("references").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception& e) {
        throw invalid_input("InvalidParallelCorpus", where + ": " + e.what());
      }
    } else {
      auto cols = split(line, '\t');
      if (cols.size() < 2) throw invalid_input("InvalidParallelCorpus", where + ": expected source<TAB>reference");
      p.source = cols[0];
      p.references.assign(cols.begin() + 1, cols.end());
    }
    if (utf8::trim(p.source).empty() || p.references.empty() ||
        std::any_of(p.references.begin(), p.references.end(), [](const auto& r) { return utf8::trim(r).empty(); })) {
      throw invalid_input("InvalidParallelCorpus", where + ": empty text");
    }
    out.push_back(std::move(p));
  }
  return out;
}

CorpusBleu corpus_bleu(const std::vector<std::string>& candidates,
                       const std::vector<std::vector<std::string>>& references, std::size_t max_n) {
  if (candidates.size() != references.size()) {
    throw invalid_input("LengthMismatch", std::to_string(candidates.size()) + " candidates for " +
                                              std::to_string(references.size()) + " reference sets");
  }
  CorpusBleu out;
  out.pairs = candidates.size();
  if (candidates.empty()) return out;
  BleuStats total;
  total.matches.assign(max_n, 0);
  total.totals.assign(max_n, 0);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::vector<Tokens> refs;
    for (const auto& r : references[i]) refs.push_back(bleu_tokens(r));
    const auto s = bleu_stats(bleu_tokens(candidates[i]), refs, max_n);
    sum += bleu_from_stats(s);
    for (std::size_t n = 0; n < max_n; ++n) {
      total.matches[n] += s.matches[n];
      total.totals[n] += s.totals[n];
    }
    total.candidate_length += s.candidate_length;
    total.reference_length += s.reference_length;
  }
  out.corpus = bleu_from_stats(total);
  out.sentence_mean = sum / static_cast<double>(candidates.size());
  return out;
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::kReading: return "reading";
    case Task::kPolishing: return "polishing";
    case Task::kTranslation: return "translation";
  }
  return "";
}

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::kFactuality: return "factuality";
    case Criterion::kInformativeness: return "informativeness";
    case Criterion::kFluency: return "fluency";
    case Criterion::kFidelity: return "fidelity";
    case Criterion::kAcademic: return "academic";
  }
  return "";
}

Task task_from_string(std::string_view s) {
  const auto t = utf8::ascii_lower(utf8::trim(s));
  for (auto v : {Task::kReading, Task::kPolishing, Task::kTranslation}) {
    if (t == to_string(v)) return v;
  }
  throw bad_record("unknown task '" + std::string(s) + "'");
}

Criterion criterion_from_string(std::string_view s) {
  const auto t = utf8::ascii_lower(utf8::trim(s));
  for (auto v : {Criterion::kFactuality, Criterion::kInformativeness, Criterion::kFluency, Criterion::kFidelity,
                 Criterion::kAcademic}) {
    if (t == to_string(v)) return v;
  }
  throw bad_record("unknown criterion '" + std::string(s) + "'");
}

MosRecord::MosRecord(Task task, Criterion criterion, std::string rater_id, int score)
    : task_(task), criterion_(criterion), rater_id_(std::move(rater_id)), score_(score) {
  if (score < 1 || score > 5) throw bad_record("score " + std::to_string(score) + " is outside 1..5");
  if (utf8::trim(rater_id_).empty()) throw bad_record("rater_id is empty");
}

std::vector<MosRecord> parse_mos_csv(std::string_view csv) {
  std::vector<MosRecord> out;
  std::size_t lineno = 0;
  for (const auto& line : lines_of(csv)) {
    ++lineno;
    if (utf8::trim(line).empty()) continue;
    auto cols = split(line, ',');
    if (cols.size() != 4) throw bad_record("line " + std::to_string(lineno) + ": expected 4 columns");
    for (auto& c : cols) c = std::string(utf8::trim(c));
    if (lineno == 1 && utf8::ascii_lower(cols[0]) == "task") continue;
    int score = 0;
    try {
      std::size_t used = 0;
      score = std::stoi(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw bad_record("line " + std::to_string(lineno) + ": score '" + cols[3] + "' is not an integer");
    }
    out.emplace_back(task_from_string(cols[0]), criterion_from_string(cols[1]), cols[2], score);
  }
  return out;
}

std::vector<MosRecord> load_mos_csv(const std::filesystem::path& path) { return parse_mos_csv(read_all(path)); }

std::map<std::string, double> aggregate_mos(const std::vector<MosRecord>& records, GroupBy by) {
  std::map<std::string, std::pair<long long, std::size_t>> acc;
  for (const auto& r : records) {
    const auto key = std::string(by == GroupBy::kCriterion ? to_string(r.criterion()) : to_string(r.task()));
    auto& [sum, n] = acc[key];
    sum += r.score();
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = static_cast<double>(v.first) / static_cast<double>(v.second);
  return out;
}

double task_average(const std::vector<MosRecord>& records, Task task) {
  std::vector<MosRecord> mine;
  for (const auto& r : records) {
    if (r.task() == task) mine.push_back(r);
  }
  if (mine.empty()) throw invalid_input("EmptyGroup", "no records for task " + std::string(to_string(task)));
  const auto means = aggregate_mos(mine, GroupBy::kCriterion);
  double sum = 0.0;
  for (const auto& [k, m] : means) sum += m;
  return sum / static_cast<double>(means.size());
}

std::string display_score(double mean) {
  const bool negative = mean < 0;
  const long long nano = std::llround(std::fabs(mean) * 1e9);
  const long long cents = (nano + 5'000'000) / 10'000'000;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", negative && cents != 0 ? "-" : "", cents / 100, cents % 100);
  return buf;
}

SftExport export_sft_dataset(const std::vector<Transcript>& transcripts,
                             const std::function<std::string(const std::string& task)>& instruction_for) {
  SftExport out;
  for (const auto& t : transcripts) {
    if (utf8::trim(t.response).empty()) {
      ++out.dropped;
      continue;
    }
    auto instruction = instruction_for(t.task);
    if (utf8::trim(instruction).empty()) throw invalid_input("InvalidSftRecord", "empty instruction for task " + t.task);
    out.records.push_back({std::move(instruction), t.prompt, t.response});
  }
  return out;
}

std::string to_jsonl(const std::vector<SftRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["instruction"] = r.instruction;
    j["input"] = r.input;
    j["output"] = r.output;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
  std::vector<Transcript> out;
  std::size_t lineno = 0;
  for (const auto& line : lines_of(read_all(path))) {
    ++lineno;
    if (utf8::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.value("task", ""), j.at("prompt").get<std::string>(), j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw invalid_input("InvalidTranscript", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string default_instruction(const std::string& task) {
  static const std::map<std::string, std::string> kInstructions = {
      {"reading", "Answer the question about the paper using the given segments and cite them."},
      {"polishing", "Polish the academic draft and list each edit with its reason."},
      {"translation", "Translate the academic text using the given terminology."},
      {"review", "Write a section of a literature review with citations."},
      {"summary", "Summarize the research landscape for the query."},
  };
  const auto it = kInstructions.find(task);
  return it == kInstructions.end() ? "Complete the task described in the input." : it->second;
}

}  // namespace litpilot::evalkit
