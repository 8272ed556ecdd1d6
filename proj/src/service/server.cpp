#include "litpilot/service/server.hpp"

#include <httplib.h>

#include <condition_variable>
#include <deque>
#include <ostream>
#include <random>
#include <thread>

#include "litpilot/app/ops.hpp"
#include "litpilot/investigation/investigation.hpp"
#include "litpilot/llm/mock.hpp"
#include "litpilot/reading/reading.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::service {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kRequestId = "X-Request-Id";

std::string fresh_request_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status(e.category()), error_body(e)); }

json parse_body(const httplib::Request& req) {
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw invalid_input("MalformedBody", std::string("request body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw invalid_input("MalformedBody", "request body must be a JSON object");
  return j;
}

const json& required(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw invalid_input("MalformedBody", std::string("missing field '") + key + "'");
  return *it;
}

std::vector<std::string> string_list(const json& j, const char* key) {
  const auto& v = required(j, key);
  if (!v.is_array()) throw invalid_input("MalformedBody", std::string("'") + key + "' must be a list of strings");
  return v.get<std::vector<std::string>>();
}

std::string sse(const ordered_json& payload) { return "data: " + payload.dump() + "\n\n"; }

// Events from the worker running one chat turn to the HTTP writer.
struct TurnChannel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> events;
  bool finished = false;
  bool streamed = false;
  std::optional<Error> early_error;  // failure before any delta
  std::thread worker;

  void push(std::string ev) {
    {
      std::lock_guard lock(mu);
      events.push_back(std::move(ev));
      streamed = true;
    }
    cv.notify_all();
  }
  void finish() {
    {
      std::lock_guard lock(mu);
      finished = true;
    }
    cv.notify_all();
  }
  void join() {
    if (worker.joinable()) worker.join();
  }
};

struct TurnOutcome {
  std::string text;
  ordered_json citations = ordered_json::array();
};

}  // namespace

int http_status(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kInvalidInput: return 400;
    case ErrorCategory::kNotFound: return 404;
    case ErrorCategory::kDomainRule: return 422;
    case ErrorCategory::kConflict: return 409;
    case ErrorCategory::kBackend: return 502;
    case ErrorCategory::kTimeout: return 504;
    case ErrorCategory::kIo:
    case ErrorCategory::kInternal: return 500;
  }
  return 500;
}

ordered_json error_body(const Error& e) {
  ordered_json j;
  j["error"] = e.kind();
  j["detail"] = e.detail();
  if (e.limit()) j["limit"] = *e.limit();
  return j;
}

struct Server::Impl {
  std::shared_ptr<app::Runtime> rt;
  std::ostream* log;
  std::mutex log_mu;
  SessionStore sessions;
  httplib::Server http;
  std::thread listener;
  int bound_port = -1;

  Impl(std::shared_ptr<app::Runtime> r, std::ostream* l)
      : rt(std::move(r)), log(l), sessions(rt->config().data_dir / "sessions") {
    http.set_payload_max_length(64u << 20);
    http.set_pre_routing_handler([](const httplib::Request& req, httplib::Response& res) {
      auto id = req.get_header_value(kRequestId);
      if (utf8::trim(id).empty() || id.size() > 128) id = fresh_request_id();
      res.set_header(kRequestId, id);
      return httplib::Server::HandlerResponse::Unhandled;
    });
    http.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
      if (!log) return;
      std::lock_guard lock(log_mu);
      *log << "request_id=" << res.get_header_value(kRequestId) << " " << req.method << " " << req.path << " "
           << res.status << std::endl;
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, Error("Internal", ErrorCategory::kInternal, e.what()));
      } catch (...) {
        send_error(res, Error("Internal", ErrorCategory::kInternal, "unknown failure"));
      }
    });
    routes();
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const json::exception& e) {
        send_error(res, invalid_input("MalformedBody", e.what()));
      } catch (const std::exception& e) {
        send_error(res, Error("Internal", ErrorCategory::kInternal, e.what()));
      }
    };
  }

  void routes() {
    auto& R = *rt;
    http.Get("/v1/health", guarded([](const auto&, auto& res) { send_json(res, 200, {{"status", "ok"}}); }));
    http.Get("/v1/papers", guarded([&R](const auto&, auto& res) {
               send_json(res, 200, {{"papers", app::paper_list(R)}});
             }));
    http.Get("/v1/papers/:id", guarded([&R](const httplib::Request& req, auto& res) {
               send_json(res, 200, app::paper(R, req.path_params.at("id")));
             }));
    http.Post("/v1/ingest", guarded([&R](const httplib::Request& req, auto& res) {
                const auto j = parse_body(req);
                const auto format = corpus::format_from_string(j.value("format", std::string("markdown")));
                const auto source = required(j, "source").get<std::string>();
                const auto id = R.ingest(source, format, j.value("source_uri", std::string()));
                send_json(res, 200, {{"doc_id", id}});
              }));
    http.Post("/v1/search", guarded([&R](const httplib::Request& req, auto& res) {
                const auto j = parse_body(req);
                const auto query = required(j, "query").get<std::string>();
                const auto k = j.value("k", std::size_t{0});
                retrieval::SearchFilter filter;
                if (j.contains("filter") && !j["filter"].is_null()) filter = retrieval::filter_from_json(j["filter"]);
                send_json(res, 200, {{"hits", app::search(R, query, k, filter)}});
              }));
    http.Post("/v1/topic", guarded([&R](const httplib::Request& req, auto& res) {
                const auto j = parse_body(req);
                send_json(res, 200, app::topic(R, required(j, "query").get<std::string>(), j.value("k", std::size_t{0})));
              }));
    http.Post("/v1/compare", guarded([&R](const httplib::Request& req, auto& res) {
                send_json(res, 200, app::compare(R, string_list(parse_body(req), "doc_ids")));
              }));
    http.Post("/v1/review", guarded([&R](const httplib::Request& req, auto& res) {
                send_json(res, 200, app::review(R, string_list(parse_body(req), "doc_ids")));
              }));
    http.Post("/v1/survey", guarded([&R](const httplib::Request& req, auto& res) {
                send_json(res, 200, app::survey(R, required(parse_body(req), "name").get<std::string>()));
              }));
    http.Post("/v1/polish", guarded([&R](const httplib::Request& req, auto& res) {
                const auto j = parse_body(req);
                send_json(res, 200,
                          app::polish(R, required(j, "draft").get<std::string>(), j.value("style", std::string("academic"))));
              }));
    http.Post("/v1/translate", guarded([&R](const httplib::Request& req, auto& res) {
                const auto j = parse_body(req);
                std::optional<std::string> domain;
                if (j.contains("domain") && !j["domain"].is_null()) domain = j["domain"].get<std::string>();
                send_json(res, 200,
                          app::translate(R, required(j, "source").get<std::string>(),
                                         required(j, "direction").get<std::string>(), domain));
              }));
    http.Post("/v1/sessions", guarded([this](const httplib::Request& req, auto& res) {
                const auto j = parse_body(req);
                const auto kind = required(j, "kind").get<std::string>();
                std::vector<std::string> ids;
                if (j.contains("doc_ids") && !j["doc_ids"].is_null()) ids = string_list(j, "doc_ids");
                if (kind == "read" && ids.size() != 1) {
                  throw invalid_input("InvalidDocIds", "a read session needs exactly one doc_id");
                }
                for (const auto& id : ids) {
                  if (!rt->kb().contains(id)) throw not_found("UnknownDocId", "no paper " + id);
                }
                send_json(res, 200, to_json(sessions.create(kind, std::move(ids))));
              }));
    http.Get("/v1/sessions/:id", guarded([this](const httplib::Request& req, auto& res) {
               const auto& id = req.path_params.at("id");
               auto s = sessions.get(id);
               if (!s) throw not_found("UnknownSession", "no session " + id);
               send_json(res, 200, to_json(*s));
             }));
    http.Post("/v1/sessions/:id/messages",
              guarded([this](const httplib::Request& req, httplib::Response& res) { chat_turn(req, res); }));
  }

  TurnOutcome run_read(const SessionRecord& s, const std::string& content, const llm::DeltaSink& sink) {
    const auto& R = *rt;
    const auto paper = R.kb().document(s.doc_ids.at(0));
    const auto chunks = R.kb().chunks_of(paper.doc_id);
    const auto model = R.kb().model();
    const auto rq =
        reading::route_question(content, paper, chunks, *model, R.backend("reading"), R.prompts(), R.config().theta);
    const reading::ReadingDeps deps{R.kb(), R.backend("reading"), R.prompts(), R.plugins()};
    const auto answer = reading::answer_question(rq, paper, deps, R.config().default_k, &sink);
    TurnOutcome out;
    out.text = answer.text;
    for (const auto& cid : answer.cited_chunk_ids) {
      const auto pos = std::find(answer.retrieved_chunk_ids.begin(), answer.retrieved_chunk_ids.end(), cid) -
                       answer.retrieved_chunk_ids.begin();
      ordered_json c;
      c["label"] = "S" + std::to_string(pos + 1);
      c["chunk_id"] = cid;
      if (const auto e = R.kb().index().get(cid)) c["doc_id"] = e->meta.doc_id;
      out.citations.push_back(std::move(c));
    }
    return out;
  }

  TurnOutcome run_investigate(const std::string& content) {
    const auto& R = *rt;
    const investigation::TopicSearchDeps deps{R.backend("topic"), R.prompts(), R.gazetteer(), R.plugins(), R.kb()};
    const auto result = investigation::topic_search(content, deps, R.config().default_k);
    TurnOutcome out;
    std::string listing;
    for (std::size_t i = 0; i < result.hits.size(); ++i) {
      const auto& h = result.hits[i];
      const auto doc = R.kb().document(h.doc_id);
      ordered_json c;
      c["label"] = std::to_string(i + 1);
      c["doc_id"] = h.doc_id;
      c["chunk_id"] = h.chunk_id;
      c["title"] = doc.title;
      out.citations.push_back(std::move(c));
      listing += "[" + std::to_string(i + 1) + "] " + doc.title + (doc.year ? " (" + std::to_string(*doc.year) + ")" : "") + "\n";
    }
    if (!result.summary.empty()) {
      out.text = result.summary;
    } else if (result.hits.empty()) {
      out.text = "No matching papers found.";
    } else {
      out.text = "Matching papers:\n" + listing;
    }
    return out;
  }

  void chat_turn(const httplib::Request& req, httplib::Response& res) {
    const auto id = req.path_params.at("id");
    const auto session = sessions.get(id);
    if (!session) throw not_found("UnknownSession", "no session " + id);
    const auto body = parse_body(req);
    const auto content = required(body, "content").get<std::string>();
    if (utf8::trim(content).empty()) throw invalid_input("EmptyMessage", "message content is empty");
    if (!sessions.try_begin_turn(id)) {
      throw Error("TurnInProgress", ErrorCategory::kConflict, "session " + id + " already has a turn in flight");
    }

    auto ch = std::make_shared<TurnChannel>();
    ch->worker = std::thread([this, ch, id, content, s = *session] {
      std::string streamed;
      const llm::DeltaSink sink = [&](std::string_view d) {
        if (d.empty()) return;
        streamed.append(d);
        ch->push(sse({{"delta", std::string(d)}}));
      };
      std::optional<std::string> final_event;
      try {
        TurnOutcome out;
        if (s.kind == "read") {
          out = run_read(s, content, sink);
        } else {
          out = run_investigate(content);
          for (const auto& piece : llm::stream_pieces(out.text)) sink(piece);
        }
        // Whatever the backend did not stream (a degraded answer, or a tail)
        // goes out as one more delta so the stream concatenates to the text.
        if (out.text.compare(0, streamed.size(), streamed) == 0) {
          sink(std::string_view(out.text).substr(streamed.size()));
        } else {
          out.text = streamed;
        }
        sessions.append_exchange(id, content, out.text);
        final_event = sse({{"done", true}, {"citations", out.citations}});
      } catch (const Error& e) {
        std::lock_guard lock(ch->mu);
        if (!ch->streamed) ch->early_error = e;
        else final_event = sse(error_body(e));
      } catch (const std::exception& e) {
        const Error err("Internal", ErrorCategory::kInternal, e.what());
        std::lock_guard lock(ch->mu);
        if (!ch->streamed) ch->early_error = err;
        else final_event = sse(error_body(err));
      }
      sessions.end_turn(id);
      if (final_event) {
        std::lock_guard lock(ch->mu);
        ch->events.push_back(std::move(*final_event));
      }
      ch->finish();
    });

    {
      std::unique_lock lock(ch->mu);
      ch->cv.wait(lock, [&] { return !ch->events.empty() || ch->finished; });
      if (ch->early_error) {
        const auto err = *ch->early_error;
        lock.unlock();
        ch->join();
        send_error(res, err);
        return;
      }
    }

    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [ch](std::size_t, httplib::DataSink& out) {
          std::unique_lock lock(ch->mu);
          ch->cv.wait(lock, [&] { return !ch->events.empty() || ch->finished; });
          while (!ch->events.empty()) {
            const auto ev = std::move(ch->events.front());
            ch->events.pop_front();
            if (!out.write(ev.data(), ev.size())) return false;
          }
          if (ch->finished) out.done();
          return true;
        },
        [ch](bool) { ch->join(); });
  }
};

Server::Server(std::shared_ptr<app::Runtime> runtime, std::ostream* log)
    : impl_(std::make_unique<Impl>(std::move(runtime), log)) {}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->bound_port = impl_->http.bind_to_any_port(host);
  } else {
    impl_->bound_port = impl_->http.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->bound_port < 0) {
    throw Error("BindFailed", ErrorCategory::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
  return impl_->bound_port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::start() {
  impl_->listener = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

int Server::port() const { return impl_->bound_port; }
SessionStore& Server::sessions() { return impl_->sessions; }
app::Runtime& Server::runtime() { return *impl_->rt; }

}  // namespace litpilot::service
