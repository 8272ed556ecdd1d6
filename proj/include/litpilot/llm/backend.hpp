#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace litpilot::llm {

enum class Role { kSystem, kUser, kAssistant };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);  // throws InvalidRequest

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

nlohmann::ordered_json to_json(const ChatMessage& m);
ChatMessage message_from_json(const nlohmann::json& j);

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  bool stream = false;

  // Throws InvalidRequest.
  void validate() const;
  // Content of the last user message ("" when there is none).
  const std::string& last_user_content() const;
};

// Single-turn request carrying one user message.
ChatRequest user_request(std::string prompt, int max_tokens = 1024);

enum class Finish { kStop, kLength, kError };
std::string_view to_string(Finish f);

struct Completion {
  std::string content;
  Finish finish = Finish::kStop;
  std::size_t tokens_in = 0;
  std::size_t tokens_out = 0;
};

using DeltaSink = std::function<void(std::string_view delta)>;

// A chat-completion model. Implementations must be safe to call from several
// threads at once.
//
// Failures are Errors with category kBackend (kinds TransportFailure,
// BackendRejected, BackendFailure) or kTimeout (kind Timeout).
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual Completion complete(const ChatRequest& request) = 0;

  // Calls `on_delta` with successive increments whose concatenation is the
  // returned content. The default delivers the whole completion at once.
  virtual Completion stream(const ChatRequest& request, const DeltaSink& on_delta);
};

// Prompt in, text out. Throws BackendFailure when the backend reports
// finish = error.
std::string ask(Backend& backend, std::string prompt, int max_tokens = 1024);

// Always fails with TransportFailure; stands in for an unreachable model.
class UnavailableBackend : public Backend {
 public:
  std::string name() const override { return "unavailable"; }
  Completion complete(const ChatRequest& request) override;
};

// True for errors raised by a backend call (transport, rejection, timeout).
bool is_backend_failure(const std::exception& e);

}  // namespace litpilot::llm
