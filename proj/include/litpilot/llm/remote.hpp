#pragma once

#include <chrono>
#include <string>

#include "litpilot/llm/backend.hpp"

namespace litpilot::llm {

struct RemoteConfig {
  std::string base_url;  // e.g. "https://api.example.com/v1"
  std::string model;
  std::chrono::milliseconds timeout{30000};
  int retries = 1;  // extra attempts after a transport failure
  // Empty means read LITPILOT_API_KEY from the environment.
  std::string api_key;
};

// OpenAI-style chat completions over HTTP:
//   POST {base_url}/chat/completions
//   {model, messages: [{role, content}], temperature, max_tokens, stream}
// Streaming responses are server-sent events ("data: {json}" ... "data: [DONE]").
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  std::string name() const override { return "remote"; }
  Completion complete(const ChatRequest& request) override;
  Completion stream(const ChatRequest& request, const DeltaSink& on_delta) override;

 private:
  Completion send(const ChatRequest& request, const DeltaSink* on_delta);

  RemoteConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

nlohmann::ordered_json wire_request(const ChatRequest& request, const std::string& model, bool stream);

}  // namespace litpilot::llm
