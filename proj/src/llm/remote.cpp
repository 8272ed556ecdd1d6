#include "litpilot/llm/remote.hpp"

#include <cstdlib>

#include <httplib.h>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"

namespace litpilot::llm {
namespace {

Finish finish_from(const nlohmann::json& reason) {
  if (!reason.is_string()) return Finish::kStop;
  const auto s = reason.get<std::string>();
  if (s == "length") return Finish::kLength;
  if (s == "stop") return Finish::kStop;
  return Finish::kError;
}

// Accumulates "data: ..." lines of an SSE body that may arrive in pieces.
class SseParser {
 public:
  SseParser(const DeltaSink* sink, Completion& out) : sink_(sink), out_(out) {}

  void feed(std::string_view bytes) {
    buf_.append(bytes);
    std::size_t nl;
    while ((nl = buf_.find('\n')) != std::string::npos) {
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      handle(line);
    }
  }
  void finish() {
    if (!buf_.empty()) handle(buf_);
    buf_.clear();
  }
  bool done() const { return done_; }

 private:
  void handle(const std::string& line) {
    if (line.rfind("data:", 0) != 0) return;
    std::string payload = line.substr(5);
    if (!payload.empty() && payload.front() == ' ') payload.erase(0, 1);
    if (payload == "[DONE]") {
      done_ = true;
      return;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::parse_error& e) {
      throw backend_error("TransportFailure", std::string("malformed stream event: ") + e.what());
    }
    if (!j.contains("choices") || j["choices"].empty()) return;
    const auto& choice = j["choices"][0];
    if (choice.contains("delta") && choice["delta"].contains("content") && choice["delta"]["content"].is_string()) {
      const auto piece = choice["delta"]["content"].get<std::string>();
      out_.content += piece;
      if (sink_ && !piece.empty()) (*sink_)(piece);
    }
    if (choice.contains("finish_reason") && !choice["finish_reason"].is_null()) {
      out_.finish = finish_from(choice["finish_reason"]);
    }
  }

  const DeltaSink* sink_;
  Completion& out_;
  std::string buf_;
  bool done_ = false;
};

}  // namespace

nlohmann::ordered_json wire_request(const ChatRequest& request, const std::string& model, bool stream) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : request.messages) j["messages"].push_back(to_json(m));
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_tokens;
  j["stream"] = stream;
  return j;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw invalid_input("InvalidConfig", "backend base_url needs a scheme: '" + config_.base_url + "'");
  }
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.api_key.empty()) {
    if (const char* key = std::getenv("LITPILOT_API_KEY")) config_.api_key = key;
  }
}

Completion RemoteBackend::complete(const ChatRequest& request) { return send(request, nullptr); }

Completion RemoteBackend::stream(const ChatRequest& request, const DeltaSink& on_delta) {
  return send(request, &on_delta);
}

Completion RemoteBackend::send(const ChatRequest& request, const DeltaSink* on_delta) {
  request.validate();
  const bool streaming = on_delta != nullptr;
  const std::string body = wire_request(request, config_.model, streaming).dump();
  const std::string path = path_prefix_ + "/chat/completions";
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  if (streaming) headers.emplace("Accept", "text/event-stream");

  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);

  for (int attempt = 0;; ++attempt) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    Completion out;
    SseParser parser(on_delta, out);
    std::string raw;
    bool any_delta = false;
    httplib::Result res;
    if (streaming) {
      httplib::Request req;
      req.method = "POST";
      req.path = path;
      req.headers = headers;
      req.headers.emplace("Content-Type", "application/json");
      req.body = body;
      int status = 0;
      req.response_handler = [&](const httplib::Response& r) {
        status = r.status;
        return true;
      };
      // A 2xx stream is parsed as it arrives; anything else is kept raw for the error.
      req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
        if (status >= 200 && status < 300) {
          any_delta = true;
          parser.feed(std::string_view(data, len));
        } else {
          raw.append(data, len);
        }
        return true;
      };
      res = client.send(req);
    } else {
      res = client.Post(path, headers, body, "application/json");
    }

    if (!res) {
      const auto err = res.error();
      // httplib reports an expired read timeout as a Read error.
      const bool timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
      // A stream that already delivered data is not retried.
      if (attempt < config_.retries && !any_delta) continue;
      if (timed_out) {
        throw Error("Timeout", ErrorCategory::kTimeout, "backend did not answer within the timeout");
      }
      throw backend_error("TransportFailure", "request to " + scheme_host_port_ + " failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
      const std::string text = streaming ? raw : res->body;
      throw backend_error("BackendRejected", "status " + std::to_string(res->status) + ": " + text.substr(0, 500));
    }
    if (streaming) {
      parser.finish();
    } else {
      try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& choice = j.at("choices").at(0);
        out.content = choice.at("message").at("content").get<std::string>();
        out.finish = finish_from(choice.contains("finish_reason") ? choice["finish_reason"] : nlohmann::json());
        if (j.contains("usage")) {
          out.tokens_in = j["usage"].value("prompt_tokens", std::size_t{0});
          out.tokens_out = j["usage"].value("completion_tokens", std::size_t{0});
        }
      } catch (const nlohmann::json::exception& e) {
        throw backend_error("BackendRejected", std::string("unexpected response body: ") + e.what());
      }
    }
    if (out.tokens_out == 0) out.tokens_out = corpus::count_tokens(out.content);
    if (out.tokens_in == 0) {
      for (const auto& m : request.messages) out.tokens_in += corpus::count_tokens(m.content);
    }
    return out;
  }
}

}  // namespace litpilot::llm
