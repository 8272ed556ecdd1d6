#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "litpilot/app/ops.hpp"
#include "litpilot/app/runtime.hpp"
#include "litpilot/embedding/contrastive.hpp"
#include "litpilot/embedding/mining.hpp"
#include "litpilot/error.hpp"
#include "litpilot/evalkit/evalkit.hpp"
#include "litpilot/investigation/investigation.hpp"
#include "litpilot/reading/reading.hpp"
#include "litpilot/service/server.hpp"
#include "litpilot/util/utf8.hpp"
#include "litpilot/writing/writing.hpp"

namespace litpilot::cli {
namespace {

using nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Non-empty lines with CR stripped; trailing blank lines are ignored.
std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && utf8::trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> split_tabs(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto p = s.find('\t', pos);
    out.push_back(s.substr(pos, p == std::string::npos ? std::string::npos : p - pos));
    if (p == std::string::npos) return out;
    pos = p + 1;
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::shared_ptr<llm::Backend> backend_override;
  std::optional<std::string> config_path;
  bool json = false;
  std::shared_ptr<app::Runtime> rt;

  app::Runtime& runtime() {
    if (!rt) {
      std::optional<std::filesystem::path> p;
      if (config_path) p = *config_path;
      rt = std::make_shared<app::Runtime>(app::resolve_config(p), backend_override);
    }
    return *rt;
  }

  void emit(const ordered_json& j) { out << j.dump(2) << "\n"; }
};

corpus::SourceFormat format_for(const std::filesystem::path& p, const std::string& flag) {
  if (!flag.empty()) return corpus::format_from_string(flag);
  const auto ext = utf8::ascii_lower(p.extension().string());
  return ext == ".md" || ext == ".markdown" ? corpus::SourceFormat::kMarkdown : corpus::SourceFormat::kPlain;
}

void cmd_ingest(Context& c, const std::string& path, const std::string& format) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      const auto ext = utf8::ascii_lower(e.path().extension().string());
      if (e.is_regular_file() && (ext == ".md" || ext == ".markdown" || ext == ".txt")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.emplace_back(path);
  }
  auto& rt = c.runtime();
  std::vector<std::string> ids;
  for (const auto& f : files) ids.push_back(rt.kb().ingest_source(read_file(f), format_for(f, format), f.string()));
  rt.save_kb();
  if (c.json) {
    c.emit({{"doc_ids", ids}});
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) c.out << ids[i] << "\t" << files[i].string() << "\n";
  }
}

void cmd_index_build(Context& c) {
  auto& rt = c.runtime();
  const auto docs = rt.kb().documents();
  kb::KnowledgeBase fresh(rt.config().chunk_policy, *rt.kb().model());
  for (const auto& d : docs) fresh.ingest(d);
  fresh.save(rt.kb_dir());
  const ordered_json j{{"documents", fresh.size()}, {"chunks", fresh.index().size()}};
  if (c.json) c.emit(j);
  else c.out << "indexed " << fresh.size() << " documents, " << fresh.index().size() << " chunks\n";
}

void cmd_search(Context& c, const std::string& query, std::size_t k, const retrieval::SearchFilter& filter) {
  auto& rt = c.runtime();
  if (c.json) {
    c.emit(app::search(rt, query, k, filter));
    return;
  }
  for (const auto& h : app::search_hits(rt, query, k, filter)) {
    c.out << fixed6(h.score) << "\t" << h.doc_id << "\t" << h.chunk_id << "\t" << h.snippet << "\n";
  }
}

void cmd_review(Context& c, const std::vector<std::string>& ids) {
  auto& rt = c.runtime();
  const auto r = investigation::generate_review(ids, rt.kb(), rt.backend("review"), rt.prompts(), rt.config().seed);
  if (c.json) c.emit(investigation::to_json(r));
  else c.out << investigation::to_markdown(r);
}

void cmd_compare(Context& c, const std::vector<std::string>& ids) {
  auto& rt = c.runtime();
  const auto r = reading::compare_papers(ids, rt.kb(), rt.backend("compare"), rt.prompts());
  if (c.json) c.emit(reading::to_json(r));
  else c.out << reading::to_markdown(r);
}

void cmd_topic(Context& c, const std::string& query, std::size_t k) {
  auto& rt = c.runtime();
  const auto j = app::topic(rt, query, k);
  if (c.json) {
    c.emit(j);
    return;
  }
  c.out << j["summary"].get<std::string>() << "\n";
  for (const auto& h : j["hits"]) c.out << h["doc_id"].get<std::string>() << "\t" << h["snippet"].get<std::string>() << "\n";
}

void cmd_survey(Context& c, const std::string& name) {
  auto& rt = c.runtime();
  const auto j = app::survey(rt, name);
  if (c.json) {
    c.emit(j);
    return;
  }
  for (const auto& g : j["groups"]) {
    c.out << g["label"].get<std::string>() << "\n";
    for (const auto& id : g["doc_ids"]) c.out << "  " << id.get<std::string>() << "\n";
  }
}

void cmd_translate(Context& c, const std::string& direction, const std::string& file, const std::string& domain) {
  auto& rt = c.runtime();
  const auto r = writing::translate(read_file(file), writing::direction_from_string(direction), rt.lexicon(),
                                    rt.backend("translate"), rt.prompts(),
                                    domain.empty() ? std::nullopt : std::optional<std::string>(domain));
  if (c.json) c.emit(writing::to_json(r));
  else c.out << r.translated << "\n";
}

void cmd_polish(Context& c, const std::string& file, const std::string& style) {
  auto& rt = c.runtime();
  const auto r = writing::polish(read_file(file), writing::style_from_string(style), rt.backend("polish"), rt.prompts());
  if (c.json) {
    c.emit(writing::to_json(r));
    return;
  }
  c.out << r.polished;
  if (r.polished.empty() || r.polished.back() != '\n') c.out << "\n";
  for (const auto& e : r.edits) c.err << "edit: " << e.original << " => " << e.replacement << " // " << e.rationale << "\n";
  if (r.violations) c.err << "violations: " << r.violations << "\n";
}

struct TrainFlags {
  std::string triples;
  std::size_t mine = 0;  // negatives per triple; 0 = read the file
  std::size_t epochs = 10;
  double lr = 0.1;
  std::size_t batch = 16;
};

void cmd_train(Context& c, const TrainFlags& f) {
  auto& rt = c.runtime();
  std::vector<embedding::TrainingTriple> triples;
  if (f.mine > 0) {
    std::vector<corpus::Chunk> chunks;
    for (const auto& d : rt.kb().documents()) {
      auto cs = rt.kb().chunks_of(d.doc_id);
      chunks.insert(chunks.end(), cs.begin(), cs.end());
    }
    triples = embedding::mine_triples(chunks, rt.backend("mining"), rt.prompts(), f.mine, rt.config().seed).triples;
    std::string text;
    for (const auto& t : triples) text += embedding::to_json(t).dump() + "\n";
    std::ofstream(f.triples, std::ios::binary) << text;
  } else {
    for (const auto& line : read_lines(f.triples)) {
      if (utf8::trim(line).empty()) continue;
      triples.push_back(embedding::triple_from_json(nlohmann::json::parse(line)));
    }
  }
  const auto& index = rt.kb().index();
  const embedding::TextResolver texts = [&index](const std::string& id) {
    const auto e = index.get(id);
    if (!e) throw not_found("UnknownChunkId", "no chunk " + id);
    return e->text;
  };
  embedding::TrainingConfig cfg;
  cfg.d_out = rt.config().model.d_out;
  cfg.temperature = rt.config().model.temperature;
  cfg.learning_rate = f.lr;
  cfg.epochs = f.epochs;
  cfg.batch = f.batch;
  cfg.seed = rt.config().seed;
  auto result = embedding::train_projection(triples, texts, cfg);
  const ordered_json j{{"triples", triples.size()},
                       {"initial_mean_loss", result.initial_mean_loss},
                       {"epoch_mean_loss", result.epoch_mean_loss}};
  rt.kb().set_model(std::move(result.model));
  rt.save_kb();
  if (c.json) {
    c.emit(j);
    return;
  }
  c.out << "triples " << triples.size() << "\ninitial_mean_loss " << fixed6(j["initial_mean_loss"].get<double>())
        << "\n";
  for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
    c.out << "epoch " << e + 1 << " mean_loss " << fixed6(result.epoch_mean_loss[e]) << "\n";
  }
}

void cmd_bleu(Context& c, const std::string& cand, const std::string& refs, std::size_t max_n) {
  const auto candidates = read_lines(cand);
  std::vector<std::vector<std::string>> references;
  for (const auto& line : read_lines(refs)) references.push_back(split_tabs(line));
  const auto r = evalkit::corpus_bleu(candidates, references, max_n);
  if (c.json) {
    c.emit({{"corpus_bleu", r.corpus}, {"sentence_bleu_mean", r.sentence_mean}, {"pairs", r.pairs}});
  } else {
    c.out << "corpus_bleu " << fixed6(r.corpus) << "\nsentence_bleu_mean " << fixed6(r.sentence_mean) << "\npairs "
          << r.pairs << "\n";
  }
}

void cmd_mos(Context& c, const std::string& file, const std::string& by) {
  const auto records = evalkit::load_mos_csv(file);
  const auto group = by == "task" ? evalkit::GroupBy::kTask : evalkit::GroupBy::kCriterion;
  const auto means = evalkit::aggregate_mos(records, group);
  ordered_json groups = ordered_json::object(), tasks = ordered_json::object();
  for (const auto& [k, v] : means) groups[k] = {{"mean", v}, {"display", evalkit::display_score(v)}};
  for (auto t : {evalkit::Task::kReading, evalkit::Task::kPolishing, evalkit::Task::kTranslation}) {
    const bool present =
        std::any_of(records.begin(), records.end(), [t](const evalkit::MosRecord& r) { return r.task() == t; });
    if (!present) continue;
    const auto avg = evalkit::task_average(records, t);
    tasks[std::string(evalkit::to_string(t))] = {{"mean", avg}, {"display", evalkit::display_score(avg)}};
  }
  if (c.json) {
    c.emit({{"records", records.size()}, {"groups", groups}, {"task_averages", tasks}});
    return;
  }
  for (const auto& [k, v] : groups.items()) c.out << k << "\t" << v["display"].get<std::string>() << "\n";
  for (const auto& [k, v] : tasks.items()) c.out << k << " average\t" << v["display"].get<std::string>() << "\n";
}

void cmd_export_sft(Context& c, const std::string& transcripts, const std::string& out_path) {
  const auto result = evalkit::export_sft_dataset(evalkit::load_transcripts(transcripts), evalkit::default_instruction);
  const auto jsonl = evalkit::to_jsonl(result.records);
  if (!out_path.empty()) std::ofstream(out_path, std::ios::binary) << jsonl;
  if (c.json) {
    ordered_json j{{"exported", result.records.size()}, {"dropped", result.dropped}};
    if (out_path.empty()) {
      j["records"] = ordered_json::array();
      for (const auto& r : result.records) {
        j["records"].push_back({{"instruction", r.instruction}, {"input", r.input}, {"output", r.output}});
      }
    }
    c.emit(j);
    return;
  }
  if (out_path.empty()) c.out << jsonl;
  c.err << "exported " << result.records.size() << ", dropped " << result.dropped << "\n";
}

void cmd_serve(Context& c, const std::string& host, int port) {
  c.runtime();
  const auto& cfg = c.rt->config();
  service::Server server(c.rt, &c.err);
  const int bound = server.bind(host.empty() ? cfg.host : host, port < 0 ? cfg.port : port);
  c.out << "listening on " << (host.empty() ? cfg.host : host) << ":" << bound << std::endl;
  server.listen();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        std::shared_ptr<llm::Backend> backend) {
  Context c{out, err, std::move(backend), std::nullopt, false, nullptr};
  std::function<void()> action;

  CLI::App app{"litpilot: literature search, reading and writing assistant", "litpilot"};
  app.require_subcommand(1);
  app.add_option("--config", c.config_path, "Service config (JSON); default $LITPILOT_CONFIG");
  app.add_flag("--json", c.json, "Machine-readable output");

  std::string path, format;
  auto* ingest = app.add_subcommand("ingest", "Parse and index a paper file or a directory of them");
  ingest->add_option("path", path)->required();
  ingest->add_option("--format", format, "markdown | plain (default: by extension)");
  ingest->callback([&] { action = [&] { cmd_ingest(c, path, format); }; });

  auto* index = app.add_subcommand("index", "Index maintenance");
  index->require_subcommand(1);
  index->add_subcommand("build", "Re-chunk and re-embed every stored paper")->callback([&] {
    action = [&] { cmd_index_build(c); };
  });

  std::string query;
  std::size_t k = 0;
  retrieval::SearchFilter filter;
  std::optional<int> year_min, year_max;
  auto* search = app.add_subcommand("search", "Hybrid search over indexed chunks");
  search->add_option("query", query)->required();
  search->add_option("--k", k, "Number of hits (default from config)");
  search->add_option("--scholar", filter.scholars);
  search->add_option("--institution", filter.institutions);
  search->add_option("--domain", filter.domains);
  search->add_option("--keyword", filter.keywords);
  search->add_option("--doc", filter.doc_ids);
  search->add_option("--year-min", year_min);
  search->add_option("--year-max", year_max);
  search->callback([&] {
    filter.year_min = year_min;
    filter.year_max = year_max;
    action = [&] { cmd_search(c, query, k, filter); };
  });

  auto* topic = app.add_subcommand("topic", "Topic search with summary statistics");
  topic->add_option("query", query)->required();
  topic->add_option("--k", k);
  topic->callback([&] { action = [&] { cmd_topic(c, query, k); }; });

  std::string name;
  auto* survey = app.add_subcommand("survey", "Group a scholar's papers by research area");
  survey->add_option("name", name)->required();
  survey->callback([&] { action = [&] { cmd_survey(c, name); }; });

  std::vector<std::string> ids;
  auto* review = app.add_subcommand("review", "Generate a literature review outline");
  review->add_option("ids", ids, "Document ids");
  review->callback([&] { action = [&] { cmd_review(c, ids); }; });

  auto* compare = app.add_subcommand("compare", "Compare two to five papers");
  compare->add_option("ids", ids, "Document ids");
  compare->callback([&] { action = [&] { cmd_compare(c, ids); }; });

  std::string direction, file, domain, style = "academic";
  auto* translate = app.add_subcommand("translate", "Terminology-aware translation");
  translate->add_option("--direction", direction, "en-zh | zh-en")->required();
  translate->add_option("file", file)->required();
  translate->add_option("--domain", domain, "Lexicon domain tag");
  translate->callback([&] { action = [&] { cmd_translate(c, direction, file, domain); }; });

  auto* polish = app.add_subcommand("polish", "Polish a draft and list the edits");
  polish->add_option("file", file)->required();
  polish->add_option("--style", style, "academic | concise");
  polish->callback([&] { action = [&] { cmd_polish(c, file, style); }; });

  TrainFlags tf;
  auto* train = app.add_subcommand("train-embed", "Train the embedding projection on triples");
  train->add_option("--triples", tf.triples, "JSON lines {question, positive_chunk, negative_chunks}")->required();
  train->add_option("--mine", tf.mine, "Generate the triples file first, with this many negatives each");
  train->add_option("--epochs", tf.epochs);
  train->add_option("--lr", tf.lr);
  train->add_option("--batch", tf.batch);
  train->callback([&] { action = [&] { cmd_train(c, tf); }; });

  auto* eval = app.add_subcommand("eval", "Evaluation harness");
  eval->require_subcommand(1);
  std::string cand, refs, records, by = "criterion";
  std::size_t max_n = 4;
  auto* bleu = eval->add_subcommand("bleu", "Corpus and mean sentence BLEU");
  bleu->add_option("--cand", cand, "One candidate per line")->required();
  bleu->add_option("--refs", refs, "Tab-separated references per line")->required();
  bleu->add_option("--max-n", max_n);
  bleu->callback([&] { action = [&] { cmd_bleu(c, cand, refs, max_n); }; });
  auto* mos = eval->add_subcommand("mos", "Aggregate human ratings");
  mos->add_option("--records", records, "CSV task,criterion,rater_id,score")->required();
  mos->add_option("--by", by)->check(CLI::IsMember({"criterion", "task"}));
  mos->callback([&] { action = [&] { cmd_mos(c, records, by); }; });

  std::string transcripts, out_path;
  auto* sft = app.add_subcommand("export-sft", "Turn transcripts into fine-tuning records");
  sft->add_option("transcripts", transcripts)->required();
  sft->add_option("--out", out_path, "Write JSON lines here instead of stdout");
  sft->callback([&] { action = [&] { cmd_export_sft(c, transcripts, out_path); }; });

  std::string host;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->callback([&] { action = [&] { cmd_serve(c, host, port); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.detail();
    if (e.limit()) err << " (limit " << *e.limit() << ")";
    err << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace litpilot::cli
