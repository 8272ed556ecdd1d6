#include "litpilot/llm/backend.hpp"

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"

namespace litpilot::llm {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::kSystem;
  if (s == "user") return Role::kUser;
  if (s == "assistant") return Role::kAssistant;
  throw invalid_input("InvalidRequest", "unknown role '" + std::string(s) + "'");
}

std::string_view to_string(Finish f) {
  switch (f) {
    case Finish::kStop: return "stop";
    case Finish::kLength: return "length";
    case Finish::kError: return "error";
  }
  return "error";
}

nlohmann::ordered_json to_json(const ChatMessage& m) {
  return {{"role", to_string(m.role)}, {"content", m.content}};
}

ChatMessage message_from_json(const nlohmann::json& j) {
  try {
    return {role_from_string(j.at("role").get<std::string>()), j.at("content").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidRequest", e.what());
  }
}

void ChatRequest::validate() const {
  if (messages.empty()) throw invalid_input("InvalidRequest", "request has no messages");
  if (messages.front().role == Role::kAssistant) {
    throw invalid_input("InvalidRequest", "first message must be system or user");
  }
  for (const auto& m : messages) {
    if (m.role != Role::kSystem && m.content.empty()) {
      throw invalid_input("InvalidRequest", "empty " + std::string(to_string(m.role)) + " message");
    }
  }
  if (!(temperature >= 0.0)) throw invalid_input("InvalidRequest", "temperature must be >= 0");
  if (max_tokens <= 0) throw invalid_input("InvalidRequest", "max_tokens must be positive");
}

const std::string& ChatRequest::last_user_content() const {
  static const std::string kEmpty;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::kUser) return it->content;
  }
  return kEmpty;
}

ChatRequest user_request(std::string prompt, int max_tokens) {
  ChatRequest r;
  r.messages.push_back({Role::kUser, std::move(prompt)});
  r.max_tokens = max_tokens;
  return r;
}

Completion Backend::stream(const ChatRequest& request, const DeltaSink& on_delta) {
  auto c = complete(request);
  if (!c.content.empty()) on_delta(c.content);
  return c;
}

std::string ask(Backend& backend, std::string prompt, int max_tokens) {
  auto c = backend.complete(user_request(std::move(prompt), max_tokens));
  if (c.finish == Finish::kError) throw backend_error("BackendFailure", "backend reported an error");
  return std::move(c.content);
}

Completion UnavailableBackend::complete(const ChatRequest& request) {
  request.validate();
  throw backend_error("TransportFailure", "no completion backend is reachable");
}

bool is_backend_failure(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return err && (err->category() == ErrorCategory::kBackend || err->category() == ErrorCategory::kTimeout);
}

}  // namespace litpilot::llm
