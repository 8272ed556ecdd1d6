#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "litpilot/corpus/chunker.hpp"
#include "litpilot/kb/knowledge_base.hpp"
#include "litpilot/llm/backend.hpp"
#include "litpilot/llm/prompt.hpp"
#include "litpilot/query/query.hpp"
#include "litpilot/writing/writing.hpp"

namespace litpilot::app {

struct BackendConfig {
  std::string kind = "none";  // none | mock | remote
  std::filesystem::path rules_path;
  std::string base_url;
  std::string model;
  long timeout_ms = 30000;
};

// Pipelines that call a backend. Each may be pointed at a named backend;
// anything not mapped uses the default one.
inline constexpr const char* kPipelines[] = {"topic",   "survey",    "review", "reading",
                                             "compare", "translate", "polish", "mining"};

// Shared by the service and the CLI. Relative paths in a config file are
// resolved against the file's directory.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  BackendConfig backend;
  std::map<std::string, BackendConfig> named_backends;   // "backends": {name: {...}}
  std::map<std::string, std::string> pipeline_backends;  // "pipelines": {pipeline: name}
  std::filesystem::path data_dir = "litpilot-data";
  std::size_t default_k = 5;
  double theta = 0.25;
  corpus::ChunkPolicy chunk_policy;
  kb::ModelSpec model;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> lexicon_path;
  std::optional<std::filesystem::path> gazetteer_path;
  std::optional<std::filesystem::path> prompts_dir;

  // Throws ConfigPathMissing for a configured path that does not exist and
  // InvalidConfig for out-of-range values.
  void validate() const;
};

ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ServiceConfig& c);

// Explicit path, else $LITPILOT_CONFIG, else defaults.
ServiceConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path);

std::shared_ptr<llm::Backend> make_backend(const BackendConfig& c);

// Everything a pipeline needs, opened from a config. The knowledge base lives
// in data_dir/kb and is created empty when absent.
class Runtime {
 public:
  explicit Runtime(ServiceConfig config);
  // For tests: explicit backend instead of the configured ones, for every pipeline.
  Runtime(ServiceConfig config, std::shared_ptr<llm::Backend> backend);

  const ServiceConfig& config() const { return config_; }
  llm::Backend& backend() const { return *backend_; }
  llm::Backend& backend(std::string_view pipeline) const;
  const llm::PromptLibrary& prompts() const { return prompts_; }
  const query::Gazetteer& gazetteer() const { return gazetteer_; }
  const writing::Lexicon& lexicon() const { return lexicon_; }
  const query::Registry& plugins() const { return plugins_; }
  kb::KnowledgeBase& kb() const { return *kb_; }
  std::filesystem::path kb_dir() const { return config_.data_dir / "kb"; }

  // Ingests and persists; serialized against other writers.
  std::string ingest(std::string_view source, corpus::SourceFormat format, std::string source_uri = {});
  void save_kb() const;

 private:
  ServiceConfig config_;
  std::shared_ptr<llm::Backend> backend_;
  std::map<std::string, std::shared_ptr<llm::Backend>, std::less<>> by_pipeline_;
  llm::PromptLibrary prompts_;
  query::Gazetteer gazetteer_;
  writing::Lexicon lexicon_;
  std::shared_ptr<kb::KnowledgeBase> kb_;
  query::Registry plugins_;
  mutable std::mutex write_mu_;
};

}  // namespace litpilot::app
