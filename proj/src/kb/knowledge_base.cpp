#include "litpilot/kb/knowledge_base.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "litpilot/error.hpp"

namespace litpilot::kb {
namespace {

constexpr const char* kFormat = "litpilot-kb/1";

void write_file(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw io_error("cannot write " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("cannot replace " + path.string() + ": " + ec.message());
}

// Stored models are float32 on disk; rounding on the way in keeps a
// reloaded knowledge base embedding exactly like the live one.
embedding::ProjectionModel to_stored_precision(embedding::ProjectionModel m) {
  for (std::uint32_t col = 0; col < embedding::kFeatureDim; ++col) {
    if (m.column(col).empty()) continue;
    for (double& w : m.mutable_column(col)) w = static_cast<double>(static_cast<float>(w));
  }
  return m;
}

// Section chunks plus the abstract, which the parser keeps out of the section
// tree but which is often the only place a paper names its topic.
std::vector<corpus::Chunk> chunk_document(const corpus::PaperDocument& doc, const corpus::ChunkPolicy& policy) {
  std::vector<corpus::Chunk> out;
  if (!doc.abstract.empty()) {
    corpus::PaperDocument head;
    head.doc_id = doc.doc_id;
    head.sections.push_back({"Abstract", 1, doc.abstract, {}});
    out = corpus::split_into_chunks(head, policy);
  }
  const std::size_t head_count = out.size();
  for (auto& c : corpus::split_into_chunks(doc, policy)) {
    // A first section literally headed "Abstract" would hash to the same ids.
    const auto same = [&](const corpus::Chunk& h) { return h.chunk_id == c.chunk_id; };
    if (std::any_of(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(head_count), same)) continue;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw io_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<retrieval::SearchHit> search_with_terms(const KnowledgeBase& kb, const std::string& text,
                                                    const retrieval::SearchFilter& filter, std::size_t k,
                                                    bool require_term) {
  if (text.empty() || kb.index().size() == 0) return {};
  embedding::EmbeddingVector v;
  try {
    v = kb.embed(text);
  } catch (const Error& e) {
    if (e.kind() == "EmptyInput" || e.kind() == "DegenerateProjection") return {};
    throw;
  }
  if (!require_term) return kb.index().hybrid_search(text, v, filter, k);

  const auto terms = retrieval::query_terms(text);
  const auto snap = kb.index().snapshot();
  std::vector<retrieval::SearchHit> out;
  for (auto& h : kb.index().hybrid_search(text, v, filter, snap->entries.size())) {
    const auto it = snap->entries.find(h.chunk_id);
    if (it == snap->entries.end()) continue;
    bool any = false;
    for (const auto& t : terms) any = any || it->second.term_counts.count(t) > 0;
    if (!any) continue;
    out.push_back(std::move(h));
    if (out.size() == k) break;
  }
  return out;
}

void apply_years(const query::StructuredQuery& q, retrieval::SearchFilter& f) {
  if (const auto b = q.year_bounds()) {
    f.year_min = b->min;
    f.year_max = b->max;
  }
}

}  // namespace

KnowledgeBase::KnowledgeBase(corpus::ChunkPolicy policy, ModelSpec spec)
    : policy_(policy),
      spec_(spec),
      model_(std::make_shared<const embedding::ProjectionModel>(
          embedding::ProjectionModel::initialize(spec.d_out, spec.temperature, spec.seed))),
      index_(spec.d_out) {
  policy_.validate();
}

KnowledgeBase::KnowledgeBase(corpus::ChunkPolicy policy, embedding::ProjectionModel model)
    : policy_(policy),
      spec_{model.d_out(), model.temperature(), model.seed()},
      custom_model_(true),
      model_(std::make_shared<const embedding::ProjectionModel>(to_stored_precision(std::move(model)))),
      index_(spec_.d_out) {
  policy_.validate();
}

std::shared_ptr<const embedding::ProjectionModel> KnowledgeBase::model() const {
  std::shared_lock lock(mu_);
  return model_;
}

std::string KnowledgeBase::paper_text(const corpus::PaperDocument& doc) {
  return doc.abstract.empty() ? doc.title : doc.title + "\n" + doc.abstract;
}

embedding::EmbeddingVector KnowledgeBase::embed(std::string_view text) const {
  return embedding::embed(text, *model());
}

retrieval::EntryMeta KnowledgeBase::meta_for(const corpus::PaperDocument& doc) {
  return {doc.doc_id, doc.year, doc.authors, doc.institutions, doc.domains, doc.venue};
}

std::vector<retrieval::IndexEntry> KnowledgeBase::entries_for(const corpus::PaperDocument& doc,
                                                              const std::vector<corpus::Chunk>& chunks,
                                                              const embedding::ProjectionModel& model) const {
  std::vector<retrieval::IndexEntry> out;
  const auto meta = meta_for(doc);
  for (const auto& c : chunks) {
    try {
      out.push_back({c.chunk_id, embedding::embed(c.text, model), c.text, meta});
    } catch (const Error& e) {
      // A chunk too short to featurize cannot be retrieved; it stays in the corpus.
      if (e.kind() != "EmptyInput" && e.kind() != "DegenerateProjection") throw;
    }
  }
  return out;
}

void KnowledgeBase::set_model(embedding::ProjectionModel model, bool trained) {
  if (model.d_out() != index_.dim()) {
    throw invalid_input("DimensionMismatch", "model d_out " + std::to_string(model.d_out()) + " != index dimension " +
                                                 std::to_string(index_.dim()));
  }
  auto m = std::make_shared<const embedding::ProjectionModel>(to_stored_precision(std::move(model)));
  std::unique_lock lock(mu_);
  std::vector<retrieval::IndexEntry> all;
  for (const auto& [id, doc] : docs_) {
    auto e = entries_for(doc, chunks_.at(id), *m);
    all.insert(all.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
  }
  index_.upsert(all);
  model_ = std::move(m);
  custom_model_ = custom_model_ || trained;
}

std::string KnowledgeBase::ingest(corpus::PaperDocument doc) {
  if (doc.doc_id.empty()) doc.doc_id = corpus::compute_doc_id(doc);
  corpus::validate(doc);
  auto chunks = chunk_document(doc, policy_);
  std::unique_lock lock(mu_);
  const auto entries = entries_for(doc, chunks, *model_);
  index_.remove_doc(doc.doc_id);
  index_.upsert(entries);
  const auto id = doc.doc_id;
  chunks_[id] = std::move(chunks);
  docs_[id] = std::move(doc);
  return id;
}

std::string KnowledgeBase::ingest_source(std::string_view source, corpus::SourceFormat format,
                                         std::string source_uri) {
  return ingest(corpus::parse_document(source, format, std::move(source_uri)));
}

bool KnowledgeBase::contains(const std::string& doc_id) const {
  std::shared_lock lock(mu_);
  return docs_.count(doc_id) > 0;
}

corpus::PaperDocument KnowledgeBase::document(const std::string& doc_id) const {
  std::shared_lock lock(mu_);
  const auto it = docs_.find(doc_id);
  if (it == docs_.end()) throw not_found("UnknownDocId", doc_id);
  return it->second;
}

std::vector<corpus::PaperDocument> KnowledgeBase::documents() const {
  std::shared_lock lock(mu_);
  std::vector<corpus::PaperDocument> out;
  for (const auto& [id, d] : docs_) out.push_back(d);
  return out;
}

std::vector<corpus::Chunk> KnowledgeBase::chunks_of(const std::string& doc_id) const {
  std::shared_lock lock(mu_);
  const auto it = chunks_.find(doc_id);
  if (it == chunks_.end()) throw not_found("UnknownDocId", doc_id);
  return it->second;
}

std::size_t KnowledgeBase::size() const {
  std::shared_lock lock(mu_);
  return docs_.size();
}

bool KnowledgeBase::exists(const std::filesystem::path& dir) {
  std::error_code ec;
  return std::filesystem::is_regular_file(dir / "kb.json", ec);
}

void KnowledgeBase::save(const std::filesystem::path& dir) const {
  std::shared_lock lock(mu_);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["format"] = kFormat;
  meta["policy"] = {{"max_tokens", policy_.max_tokens},
                    {"overlap_tokens", policy_.overlap_tokens},
                    {"min_tokens", policy_.min_tokens}};
  meta["model"] = {{"d_out", spec_.d_out}, {"temperature", spec_.temperature}, {"seed", spec_.seed}};
  if (custom_model_) {
    meta["model"]["file"] = "projection.bin";
    model_->save(dir / "projection.bin");
  }
  meta["documents"] = docs_.size();

  std::string docs, chunks;
  for (const auto& [id, d] : docs_) {
    docs += corpus::to_json(d).dump() + "\n";
    for (const auto& c : chunks_.at(id)) chunks += corpus::to_json(c).dump() + "\n";
  }
  write_file(dir / "documents.jsonl", docs);
  write_file(dir / "chunks.jsonl", chunks);
  index_.save(dir / "index");
  write_file(dir / "kb.json", meta.dump(2) + "\n");
}

std::shared_ptr<KnowledgeBase> KnowledgeBase::load(const std::filesystem::path& dir) {
  if (!exists(dir)) throw io_error("no knowledge base at " + dir.string());
  nlohmann::json meta;
  try {
    std::ifstream in(dir / "kb.json");
    meta = nlohmann::json::parse(in);
    if (meta.value("format", "") != kFormat) throw io_error("unsupported knowledge base format in " + dir.string());
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad kb.json in " + dir.string() + ": " + e.what());
  }
  corpus::ChunkPolicy policy;
  policy.max_tokens = meta["policy"]["max_tokens"].get<std::size_t>();
  policy.overlap_tokens = meta["policy"]["overlap_tokens"].get<std::size_t>();
  policy.min_tokens = meta["policy"]["min_tokens"].get<std::size_t>();
  const auto& m = meta["model"];

  std::shared_ptr<KnowledgeBase> kb;
  if (m.contains("file")) {
    kb = std::make_shared<KnowledgeBase>(policy,
                                         embedding::ProjectionModel::load(dir / m["file"].get<std::string>()));
  } else {
    kb = std::make_shared<KnowledgeBase>(
        policy, ModelSpec{m["d_out"].get<std::size_t>(), m["temperature"].get<double>(), m["seed"].get<std::uint64_t>()});
  }
  for (const auto& j : read_jsonl(dir / "documents.jsonl")) {
    auto d = corpus::document_from_json(j);
    kb->docs_[d.doc_id] = std::move(d);
  }
  for (const auto& j : read_jsonl(dir / "chunks.jsonl")) {
    auto c = corpus::chunk_from_json(j);
    kb->chunks_[c.doc_id].push_back(std::move(c));
  }
  for (const auto& [id, d] : kb->docs_) kb->chunks_[id];
  kb->index_ = retrieval::VectorIndex::load(dir / "index");
  if (kb->index_.dim() != kb->spec_.d_out) {
    throw io_error("index dimension does not match the model in " + dir.string());
  }
  return kb;
}

std::vector<retrieval::SearchHit> LocalIndexPlugin::execute(const query::StructuredQuery& q, std::size_t k) {
  retrieval::SearchFilter f;
  apply_years(q, f);
  return search_with_terms(*kb_, query::search_text(q), f, k, true);
}

std::vector<retrieval::SearchHit> ScholarIndexPlugin::execute(const query::StructuredQuery& q, std::size_t k) {
  retrieval::SearchFilter f;
  f.scholars = q.scholars;
  f.institutions = q.institutions;
  apply_years(q, f);
  std::string text = query::search_text(q);
  if (text.empty()) {
    for (const auto* names : {&q.scholars, &q.institutions}) {
      for (const auto& n : *names) text += (text.empty() ? "" : " ") + n;
    }
  }
  return search_with_terms(*kb_, text, f, k, false);
}

query::Registry default_registry(std::shared_ptr<const KnowledgeBase> kb) {
  query::Registry r;
  r[query::kLocalPlugin] = std::make_shared<LocalIndexPlugin>(kb);
  r[query::kScholarPlugin] = std::make_shared<ScholarIndexPlugin>(std::move(kb));
  return r;
}

}  // namespace litpilot::kb
