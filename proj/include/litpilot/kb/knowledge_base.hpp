#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "litpilot/corpus/chunker.hpp"
#include "litpilot/corpus/document.hpp"
#include "litpilot/embedding/projection.hpp"
#include "litpilot/query/query.hpp"
#include "litpilot/retrieval/index.hpp"

namespace litpilot::kb {

struct ModelSpec {
  std::size_t d_out = 256;
  double temperature = 0.05;
  std::uint64_t seed = 0;
};

// Papers, their chunks, the chunk index and the projection used to embed
// them. Documents are replaced wholesale when re-ingested under the same id.
class KnowledgeBase {
 public:
  // Randomly initialized projection from `spec`.
  explicit KnowledgeBase(corpus::ChunkPolicy policy = {}, ModelSpec spec = {});
  KnowledgeBase(corpus::ChunkPolicy policy, embedding::ProjectionModel model);

  const corpus::ChunkPolicy& policy() const { return policy_; }
  std::shared_ptr<const embedding::ProjectionModel> model() const;
  const retrieval::VectorIndex& index() const { return index_; }

  // Swaps the projection and re-embeds every chunk.
  void set_model(embedding::ProjectionModel model, bool trained = true);

  // Validates, chunks, embeds and indexes the document; returns its id.
  std::string ingest(corpus::PaperDocument doc);
  std::string ingest_source(std::string_view source, corpus::SourceFormat format, std::string source_uri = {});

  bool contains(const std::string& doc_id) const;
  // Throws UnknownDocId.
  corpus::PaperDocument document(const std::string& doc_id) const;
  std::vector<corpus::PaperDocument> documents() const;  // by doc_id
  std::vector<corpus::Chunk> chunks_of(const std::string& doc_id) const;
  std::size_t size() const;

  // Text used to embed a paper as a whole (title and abstract).
  static std::string paper_text(const corpus::PaperDocument& doc);
  embedding::EmbeddingVector embed(std::string_view text) const;

  // data_dir/kb.json, documents.jsonl, chunks.jsonl, index/, and
  // projection.bin when the model was trained or set explicitly.
  void save(const std::filesystem::path& dir) const;
  static std::shared_ptr<KnowledgeBase> load(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

 private:
  static retrieval::EntryMeta meta_for(const corpus::PaperDocument& doc);
  std::vector<retrieval::IndexEntry> entries_for(const corpus::PaperDocument& doc,
                                                 const std::vector<corpus::Chunk>& chunks,
                                                 const embedding::ProjectionModel& model) const;

  corpus::ChunkPolicy policy_;
  ModelSpec spec_;
  bool custom_model_ = false;
  mutable std::shared_mutex mu_;
  std::shared_ptr<const embedding::ProjectionModel> model_;
  std::map<std::string, corpus::PaperDocument> docs_;
  std::map<std::string, std::vector<corpus::Chunk>> chunks_;
  retrieval::VectorIndex index_;
};

// Hybrid search over the whole index. Domains are folded into the search text
// rather than used as a hard filter; years are a hard filter. Hits without
// any query term in their text are dropped so unrelated queries come back
// empty.
class LocalIndexPlugin : public query::SearchPlugin {
 public:
  explicit LocalIndexPlugin(std::shared_ptr<const KnowledgeBase> kb) : kb_(std::move(kb)) {}
  std::string name() const override { return query::kLocalPlugin; }
  std::vector<retrieval::SearchHit> execute(const query::StructuredQuery& q, std::size_t k) override;

 private:
  std::shared_ptr<const KnowledgeBase> kb_;
};

// Papers by the named scholars or institutions (hard filters), ranked by
// hybrid score against the rest of the query.
class ScholarIndexPlugin : public query::SearchPlugin {
 public:
  explicit ScholarIndexPlugin(std::shared_ptr<const KnowledgeBase> kb) : kb_(std::move(kb)) {}
  std::string name() const override { return query::kScholarPlugin; }
  std::vector<retrieval::SearchHit> execute(const query::StructuredQuery& q, std::size_t k) override;

 private:
  std::shared_ptr<const KnowledgeBase> kb_;
};

query::Registry default_registry(std::shared_ptr<const KnowledgeBase> kb);

}  // namespace litpilot::kb
