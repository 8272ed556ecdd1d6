#include "litpilot/app/runtime.hpp"

#include <cstdlib>
#include <fstream>

#include "litpilot/error.hpp"
#include "litpilot/llm/mock.hpp"
#include "litpilot/llm/remote.hpp"

namespace litpilot::app {
namespace {

Error config_error(const std::string& detail) { return invalid_input("InvalidConfig", detail); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void require_path(const std::optional<std::filesystem::path>& p, const std::string& what) {
  std::error_code ec;
  if (p && !std::filesystem::exists(*p, ec)) {
    throw Error("ConfigPathMissing", ErrorCategory::kIo, what + " not found: " + p->string());
  }
}

void validate_backend(const BackendConfig& b) {
  if (b.kind == "mock") {
    require_path(b.rules_path, "mock rules file");
  } else if (b.kind == "remote") {
    if (b.base_url.empty()) throw config_error("remote backend needs base_url");
  } else if (b.kind != "none") {
    throw config_error("unknown backend kind '" + b.kind + "'");
  }
}

BackendConfig backend_from_json(const nlohmann::json& b, const std::filesystem::path& base_dir) {
  BackendConfig c;
  c.kind = b.value("kind", c.kind);
  if (b.contains("rules")) c.rules_path = resolve(base_dir, b["rules"].get<std::string>());
  c.base_url = b.value("base_url", c.base_url);
  c.model = b.value("model", c.model);
  c.timeout_ms = b.value("timeout_ms", c.timeout_ms);
  return c;
}

nlohmann::ordered_json backend_to_json(const BackendConfig& c) {
  return {{"kind", c.kind},
          {"rules", c.rules_path.string()},
          {"base_url", c.base_url},
          {"model", c.model},
          {"timeout_ms", c.timeout_ms}};
}

bool known_pipeline(std::string_view name) {
  for (const char* p : kPipelines) {
    if (name == p) return true;
  }
  return false;
}

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw config_error("port out of range: " + std::to_string(port));
  if (default_k == 0) throw config_error("default_k must be at least 1");
  if (!(theta >= -1.0 && theta <= 1.0)) throw config_error("theta must lie in [-1, 1]");
  chunk_policy.validate();
  if (model.d_out == 0 || !(model.temperature > 0.0)) throw config_error("model d_out and temperature must be positive");
  validate_backend(backend);
  for (const auto& [name, b] : named_backends) validate_backend(b);
  for (const auto& [pipeline, name] : pipeline_backends) {
    if (!known_pipeline(pipeline)) throw config_error("unknown pipeline '" + pipeline + "'");
    if (name != "default" && !named_backends.count(name)) {
      throw config_error("pipeline '" + pipeline + "' names unknown backend '" + name + "'");
    }
  }
  require_path(lexicon_path, "lexicon");
  require_path(gazetteer_path, "gazetteer");
  require_path(prompts_dir, "prompt directory");
}

ServiceConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("backend")) c.backend = backend_from_json(j["backend"], base_dir);
    if (j.contains("backends")) {
      for (const auto& [name, b] : j["backends"].items()) c.named_backends[name] = backend_from_json(b, base_dir);
    }
    if (j.contains("pipelines")) {
      for (const auto& [pipeline, name] : j["pipelines"].items()) c.pipeline_backends[pipeline] = name.get<std::string>();
    }
    if (j.contains("data_dir")) c.data_dir = resolve(base_dir, j["data_dir"].get<std::string>());
    c.default_k = j.value("default_k", c.default_k);
    c.theta = j.value("theta", c.theta);
    if (j.contains("chunk_policy")) {
      const auto& p = j["chunk_policy"];
      c.chunk_policy.max_tokens = p.value("max_tokens", c.chunk_policy.max_tokens);
      c.chunk_policy.overlap_tokens = p.value("overlap_tokens", c.chunk_policy.overlap_tokens);
      c.chunk_policy.min_tokens = p.value("min_tokens", c.chunk_policy.min_tokens);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.model.d_out = m.value("d_out", c.model.d_out);
      c.model.temperature = m.value("temperature", c.model.temperature);
      c.model.seed = m.value("seed", c.model.seed);
    }
    c.seed = j.value("seed", c.seed);
    for (auto [key, slot] : {std::pair{"lexicon", &c.lexicon_path}, std::pair{"gazetteer", &c.gazetteer_path},
                             std::pair{"prompts_dir", &c.prompts_dir}}) {
      if (j.contains(key) && !j[key].is_null()) *slot = resolve(base_dir, j[key].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(e.what());
  }
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("ConfigPathMissing", ErrorCategory::kIo, "config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::ordered_json to_json(const ServiceConfig& c) {
  nlohmann::ordered_json j;
  j["host"] = c.host;
  j["port"] = c.port;
  j["backend"] = backend_to_json(c.backend);
  j["backends"] = nlohmann::ordered_json::object();
  for (const auto& [name, b] : c.named_backends) j["backends"][name] = backend_to_json(b);
  j["pipelines"] = c.pipeline_backends;
  j["data_dir"] = c.data_dir.string();
  j["default_k"] = c.default_k;
  j["theta"] = c.theta;
  j["chunk_policy"] = {{"max_tokens", c.chunk_policy.max_tokens},
                       {"overlap_tokens", c.chunk_policy.overlap_tokens},
                       {"min_tokens", c.chunk_policy.min_tokens}};
  j["model"] = {{"d_out", c.model.d_out}, {"temperature", c.model.temperature}, {"seed", c.model.seed}};
  j["seed"] = c.seed;
  const auto opt = [](const auto& p) { return p ? nlohmann::ordered_json(p->string()) : nlohmann::ordered_json(nullptr); };
  j["lexicon"] = opt(c.lexicon_path);
  j["gazetteer"] = opt(c.gazetteer_path);
  j["prompts_dir"] = opt(c.prompts_dir);
  return j;
}

ServiceConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return load_config(*explicit_path);
  if (const char* env = std::getenv("LITPILOT_CONFIG"); env && *env) return load_config(env);
  return ServiceConfig{};
}

std::shared_ptr<llm::Backend> make_backend(const BackendConfig& c) {
  if (c.kind == "mock") return std::make_shared<llm::MockBackend>(llm::MockBackend::rules_from_file(c.rules_path));
  if (c.kind == "remote") {
    llm::RemoteConfig rc;
    rc.base_url = c.base_url;
    rc.model = c.model;
    rc.timeout = std::chrono::milliseconds(c.timeout_ms);
    return std::make_shared<llm::RemoteBackend>(rc);
  }
  return std::make_shared<llm::UnavailableBackend>();
}

Runtime::Runtime(ServiceConfig config) : Runtime(config, nullptr) {}

Runtime::Runtime(ServiceConfig config, std::shared_ptr<llm::Backend> backend) : config_(std::move(config)) {
  config_.validate();
  backend_ = backend ? backend : make_backend(config_.backend);
  if (!backend) {
    std::map<std::string, std::shared_ptr<llm::Backend>> named;
    for (const auto& [name, b] : config_.named_backends) named[name] = make_backend(b);
    for (const auto& [pipeline, name] : config_.pipeline_backends) {
      if (name != "default") by_pipeline_[pipeline] = named.at(name);
    }
  }
  prompts_ = config_.prompts_dir ? llm::PromptLibrary::load(*config_.prompts_dir) : llm::PromptLibrary::load_default();
  if (config_.gazetteer_path) gazetteer_ = query::Gazetteer::load(*config_.gazetteer_path);
  if (config_.lexicon_path) lexicon_ = writing::Lexicon::load(*config_.lexicon_path);
  kb_ = kb::KnowledgeBase::exists(kb_dir()) ? kb::KnowledgeBase::load(kb_dir())
                                            : std::make_shared<kb::KnowledgeBase>(config_.chunk_policy, config_.model);
  plugins_ = kb::default_registry(kb_);
}

llm::Backend& Runtime::backend(std::string_view pipeline) const {
  const auto it = by_pipeline_.find(pipeline);
  return it == by_pipeline_.end() ? *backend_ : *it->second;
}

std::string Runtime::ingest(std::string_view source, corpus::SourceFormat format, std::string source_uri) {
  std::lock_guard lock(write_mu_);
  auto id = kb_->ingest_source(source, format, std::move(source_uri));
  kb_->save(kb_dir());
  return id;
}

void Runtime::save_kb() const {
  std::lock_guard lock(write_mu_);
  kb_->save(kb_dir());
}

}  // namespace litpilot::app
