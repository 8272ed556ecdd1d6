#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "litpilot/error.hpp"
#include "litpilot/llm/backend.hpp"
#include "litpilot/llm/mock.hpp"
#include "litpilot/llm/prompt.hpp"
#include "litpilot/llm/remote.hpp"

using namespace litpilot;
using namespace litpilot::llm;

namespace {

std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

// Local chat-completions stub on an ephemeral port.
class StubServer {
 public:
  StubServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("render substitutes slots") {
  PromptTemplate t{"t", "Translate: {text}", {}};
  CHECK(render(t, {{"text", "hi"}}) == "Translate: hi");
  CHECK(kind_of([&] { render(t, {}); }) == "MissingSlot");
  CHECK(kind_of([&] { render(t, {{"text", "a"}, {"extra", "b"}}); }) == "UnknownSlot");
  try {
    render(t, {});
  } catch (const Error& e) {
    CHECK(e.detail() == "text");
  }
  // Slot values are not rescanned; braces that are not placeholders stay.
  PromptTemplate u{"u", "{a}|{b}|{not a slot}|{}", {}};
  CHECK(render(u, {{"a", "{b}"}, {"b", "x"}}) == "{b}|x|{not a slot}|{}");
  CHECK(u.slots() == std::set<std::string>{"a", "b"});
}

TEST_CASE("render places exemplars before the body") {
  PromptTemplate t{"t", "Fix: {draft}", {{"teh cat", "the cat"}, {"a apple", "an apple"}}};
  const std::string expected =
      "Example input: teh cat\n"
      "Example output: the cat\n"
      "\n"
      "Example input: a apple\n"
      "Example output: an apple\n"
      "\n"
      "Fix: my draft";
  CHECK(render(t, {{"draft", "my draft"}}) == expected);
}

TEST_CASE("template files") {
  const auto t = parse_template_file("x", "# comment\n\n@@input\nin 1\n@@output\nout 1\n\n@@template\n\nTask: x\nBody {a}\n\n");
  CHECK(t.body == "Task: x\nBody {a}");
  REQUIRE(t.exemplars.size() == 1);
  CHECK(t.exemplars[0] == std::pair<std::string, std::string>{"in 1", "out 1"});
  CHECK(kind_of([] { parse_template_file("x", "stray\n@@template\nb"); }) == "InvalidTemplate");
  CHECK(kind_of([] { parse_template_file("x", "@@output\nb"); }) == "InvalidTemplate");
  CHECK(kind_of([] { parse_template_file("x", "@@input\nb\n@@template\nc"); }) == "InvalidTemplate");
  CHECK(kind_of([] { parse_template_file("x", "@@input\na\n@@output\nb"); }) == "InvalidTemplate");

  const auto lib = PromptLibrary::load_default();
  for (const char* name : {"triple_question", "query_rewrite", "topic_summary", "area_label", "review_section",
                           "review_intro", "review_conclusion", "route", "read_answer", "extract_contrib",
                           "compare_summary", "translate", "polish"}) {
    INFO(name);
    REQUIRE(lib.contains(name));
    CHECK(lib.get(name).body.rfind(std::string("Task: ") + name + "\n", 0) == 0);
  }
  CHECK(lib.get("polish").exemplars.size() == 2);
  CHECK(kind_of([&] { lib.get("nope"); }) == "UnknownTemplate");
}

TEST_CASE("mock backend rules") {
  MockBackend ok({{MatchKind::kContains, "", "OK"}});
  CHECK(ask(ok, "anything") == "OK");
  CHECK(ask(ok, "else") == "OK");

  MockBackend m({{MatchKind::kContains, "translate", "你好"},
                 {MatchKind::kExact, "ping", "pong"},
                 {MatchKind::kRegex, "^Task: (a|b)\\b", "task-ab"},
                 {MatchKind::kContains, "", "?"}});
  CHECK(ask(m, "please translate hello") == "你好");
  CHECK(ask(m, "ping") == "pong");
  CHECK(ask(m, "ping ") == "?");
  CHECK(ask(m, "Task: b\nmore") == "task-ab");
  CHECK(ask(m, "translate ping") == "你好");  // first match wins
  const auto tr = m.transcript();
  REQUIRE(tr.size() == 5);
  CHECK(tr[0].messages[0].content == "please translate hello");
  CHECK(tr[0].response == "你好");

  CHECK(kind_of([] { MockBackend({{MatchKind::kContains, "x", "y"}}); }) == "InvalidMockRules");
  CHECK(kind_of([] { MockBackend({{MatchKind::kExact, "", "y"}}); }) == "InvalidMockRules");
  CHECK(kind_of([] { MockBackend({{MatchKind::kRegex, "(", "y"}, {MatchKind::kContains, "", "z"}}); }) ==
        "InvalidMockRules");
  CHECK(kind_of([] { MockBackend(std::vector<MockRule>{}); }) == "InvalidMockRules");
  MockBackend re_all({{MatchKind::kRegex, ".*", "all"}});
  CHECK(ask(re_all, "x") == "all");

  auto from_json = MockBackend::from_json(nlohmann::json::parse(
      R"([{"match":"contains","pattern":"Task: route","response":"OUT"},{"match":"contains","pattern":"","response":"{{prompt}}"}])"));
  CHECK(ask(from_json, "Task: route\nq") == "OUT");
  CHECK(ask(from_json, "echo me") == "echo me");
  CHECK(kind_of([&] { from_json.complete(ChatRequest{}); }) == "InvalidRequest");
}

TEST_CASE("mock streaming concatenates to the completion") {
  MockBackend m({{MatchKind::kContains, "", "Hello  world, 这是 a test.\nDone "}});
  std::string joined;
  std::vector<std::string> pieces;
  auto req = user_request("x");
  req.stream = true;
  const auto c = m.stream(req, [&](std::string_view d) {
    pieces.emplace_back(d);
    joined += d;
  });
  CHECK(joined == c.content);
  CHECK(c.content == ask(m, "x"));
  CHECK(pieces.size() > 4);
  CHECK(pieces[0] == "Hello  ");
  CHECK(stream_pieces("") .empty());
}

TEST_CASE("mock is deterministic and thread safe") {
  MockBackend m({{MatchKind::kContains, "", "{{prompt}}!"}});
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&m, t] {
      for (int i = 0; i < 50; ++i) ask(m, "t" + std::to_string(t) + "-" + std::to_string(i));
    });
  }
  for (auto& th : threads) th.join();
  CHECK(m.call_count() == 200);
  for (const auto& e : m.transcript()) CHECK(e.response == e.messages.back().content + "!");
}

TEST_CASE("unavailable backend") {
  UnavailableBackend b;
  CHECK(kind_of([&] { ask(b, "x"); }) == "TransportFailure");
  try {
    ask(b, "x");
  } catch (const std::exception& e) {
    CHECK(is_backend_failure(e));
  }
}

TEST_CASE("remote backend against a stub server") {
  StubServer stub;
  std::string seen_body, seen_auth;
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    const auto j = nlohmann::json::parse(req.body);
    if (j["stream"].get<bool>()) {
      std::string sse;
      for (const char* piece : {"Hel", "lo ", "世界"}) {
        sse += "data: " + nlohmann::json{{"choices", {{{"delta", {{"content", piece}}}}}}}.dump() + "\n\n";
      }
      sse += "data: {\"choices\":[{\"delta\":{},\"finish_reason\":\"stop\"}]}\n\ndata: [DONE]\n\n";
      res.set_content(sse, "text/event-stream");
      return;
    }
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"canned answer"},"finish_reason":"stop"}],
                        "usage":{"prompt_tokens":7,"completion_tokens":2}})",
                    "application/json");
  });

  RemoteBackend remote({stub.url(), "test-model", std::chrono::milliseconds(2000), 1, "secret"});
  auto req = user_request("hello there");
  const auto c = remote.complete(req);
  CHECK(c.content == "canned answer");
  CHECK(c.finish == Finish::kStop);
  CHECK(c.tokens_in == 7);
  CHECK(seen_auth == "Bearer secret");
  const auto body = nlohmann::json::parse(seen_body);
  CHECK(body["model"] == "test-model");
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "hello there");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["stream"] == false);

  std::vector<std::string> deltas;
  const auto s = remote.stream(req, [&](std::string_view d) { deltas.emplace_back(d); });
  CHECK(s.content == "Hello 世界");
  CHECK(deltas == std::vector<std::string>{"Hel", "lo ", "世界"});
  CHECK(nlohmann::json::parse(seen_body)["stream"] == true);
}

TEST_CASE("remote backend errors") {
  StubServer stub;
  std::atomic<int> calls{0};
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
    res.set_content("{\"error\":\"bad model\"}", "application/json");
  });
  stub.server().Post("/slow/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content("{}", "application/json");
  });
  RemoteBackend rejecting({stub.url(), "m", std::chrono::milliseconds(2000), 1, "k"});
  try {
    rejecting.complete(user_request("x"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == "BackendRejected");
    CHECK(e.detail().find("400") != std::string::npos);
    CHECK(e.detail().find("bad model") != std::string::npos);
  }
  CHECK(calls == 1);  // rejections are not retried

  calls = 0;
  const auto slow_url = stub.url().substr(0, stub.url().size() - 3) + "/slow";
  RemoteBackend slow({slow_url, "m", std::chrono::milliseconds(100), 1, "k"});
  CHECK(kind_of([&] { slow.complete(user_request("x")); }) == "Timeout");
  CHECK(calls == 2);  // one retry

  RemoteBackend nowhere({"http://127.0.0.1:1/v1", "m", std::chrono::milliseconds(200), 1, "k"});
  CHECK(kind_of([&] { nowhere.complete(user_request("x")); }) == "TransportFailure");
  CHECK(kind_of([] { RemoteBackend({"no-scheme", "m"}); }) == "InvalidConfig");
}
