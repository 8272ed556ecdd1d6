#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include <json.hpp>

#include "litpilot/app/runtime.hpp"
#include "litpilot/error.hpp"
#include "litpilot/service/sessions.hpp"

namespace litpilot::service {

int http_status(ErrorCategory c);

// {error: kind, detail, limit?}
nlohmann::ordered_json error_body(const Error& e);

// REST + SSE front end over one Runtime. Sessions live in data_dir/sessions.
//
//   GET  /v1/health | /v1/papers | /v1/papers/{id} | /v1/sessions/{id}
//   POST /v1/ingest {format, source, source_uri?}
//   POST /v1/search {query, k?, filter?}
//   POST /v1/sessions {kind, doc_ids?}
//   POST /v1/sessions/{id}/messages {content}        -> text/event-stream
//   POST /v1/compare {doc_ids} | /v1/review {doc_ids} | /v1/survey {name}
//   POST /v1/topic {query, k?}
//   POST /v1/polish {draft, style} | /v1/translate {source, direction, domain?}
//
// Every response carries X-Request-Id (the client's, or a fresh one), and
// each request is logged with it.
class Server {
 public:
  explicit Server(std::shared_ptr<app::Runtime> runtime, std::ostream* log = nullptr);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port 0 picks a free one. Returns the bound port; throws BindFailed.
  int bind(const std::string& host, int port);
  // Serves until stop(). bind() first.
  void listen();
  // listen() on a background thread; returns once the server accepts.
  void start();
  void stop();
  int port() const;

  SessionStore& sessions();
  app::Runtime& runtime();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace litpilot::service
