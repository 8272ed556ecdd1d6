#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace litpilot::evalkit {

using Tokens = std::vector<std::string>;

// Whitespace words, one token per CJK character.
Tokens bleu_tokens(std::string_view text);

struct BleuStats {
  std::vector<std::size_t> matches;  // clipped n-gram matches, n = 1..max_n
  std::vector<std::size_t> totals;   // candidate n-gram counts
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // closest reference length, ties to the shorter
};

BleuStats bleu_stats(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t max_n = 4);

// Score from accumulated statistics. p_1 = 0 gives 0; a zero p_n for n >= 2
// becomes 1 / (2 * total_n), with total_n taken as 1 when the candidate has
// no n-grams of that order.
double bleu_from_stats(const BleuStats& s);

// Sentence BLEU. Throws EmptyReferences; an empty candidate scores 0.
double bleu(const Tokens& candidate, const std::vector<Tokens>& references, std::size_t max_n = 4);

// Brevity penalty: 1 if c > r, else exp(1 - r / c).
double brevity_penalty(std::size_t c, std::size_t r);

struct ParallelPair {
  std::string source;
  std::vector<std::string> references;
};

// TSV (source, reference...) or JSON lines {source, references[]}, chosen by
// the .jsonl extension. Throws InvalidParallelCorpus.
std::vector<ParallelPair> load_parallel(const std::filesystem::path& path);

struct CorpusBleu {
  double corpus = 0.0;         // statistics summed over all pairs
  double sentence_mean = 0.0;  // mean of per-pair scores
  std::size_t pairs = 0;
};

// Candidates pair up with reference sets by position. Throws LengthMismatch.
CorpusBleu corpus_bleu(const std::vector<std::string>& candidates,
                       const std::vector<std::vector<std::string>>& references, std::size_t max_n = 4);

enum class Task { kReading, kPolishing, kTranslation };
enum class Criterion { kFactuality, kInformativeness, kFluency, kFidelity, kAcademic };

std::string_view to_string(Task t);
std::string_view to_string(Criterion c);
Task task_from_string(std::string_view s);            // throws InvalidMosRecord
Criterion criterion_from_string(std::string_view s);  // throws InvalidMosRecord

class MosRecord {
 public:
  // Throws InvalidMosRecord unless 1 <= score <= 5 and rater_id is non-empty.
  MosRecord(Task task, Criterion criterion, std::string rater_id, int score);

  Task task() const { return task_; }
  Criterion criterion() const { return criterion_; }
  const std::string& rater_id() const { return rater_id_; }
  int score() const { return score_; }

 private:
  Task task_;
  Criterion criterion_;
  std::string rater_id_;
  int score_;
};

// CSV with header task,criterion,rater_id,score.
std::vector<MosRecord> parse_mos_csv(std::string_view csv);
std::vector<MosRecord> load_mos_csv(const std::filesystem::path& path);

enum class GroupBy { kCriterion, kTask };

// Mean score per group at full precision; empty groups are absent.
std::map<std::string, double> aggregate_mos(const std::vector<MosRecord>& records, GroupBy by);

// Unweighted mean of the per-criterion means of one task (the figure tables
// report as the task average). Throws EmptyGroup when the task has no records.
double task_average(const std::vector<MosRecord>& records, Task task);

// Two decimals, half-up. The value is first rounded to 9 decimals so binary
// noise (4.565 stored as 4.56499999...) does not decide the rounding.
std::string display_score(double mean);

struct Transcript {
  std::string task;
  std::string prompt;
  std::string response;
};

struct SftRecord {
  std::string instruction;
  std::string input;
  std::string output;
};

struct SftExport {
  std::vector<SftRecord> records;
  std::size_t dropped = 0;
};

// Records with an empty response (after trimming) are dropped. Throws
// InvalidSftRecord when instruction_for yields an empty instruction.
SftExport export_sft_dataset(const std::vector<Transcript>& transcripts,
                             const std::function<std::string(const std::string& task)>& instruction_for);

// One {"instruction","input","output"} object per line.
std::string to_jsonl(const std::vector<SftRecord>& records);

// JSON lines {task, prompt, response}.
std::vector<Transcript> load_transcripts(const std::filesystem::path& path);

// Instruction text for the built-in task names; unknown tasks get a generic one.
std::string default_instruction(const std::string& task);

}  // namespace litpilot::evalkit
