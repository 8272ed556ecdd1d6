#include "litpilot/llm/mock.hpp"

#include <fstream>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::llm {
namespace {

constexpr std::string_view kEcho = "{{prompt}}";

bool matches(const MockRule& rule, const std::regex& re, const std::string& prompt) {
  switch (rule.match) {
    case MatchKind::kExact: return prompt == rule.pattern;
    case MatchKind::kContains: return prompt.find(rule.pattern) != std::string::npos;
    case MatchKind::kRegex: return std::regex_search(prompt, re);
  }
  return false;
}

MatchKind kind_from_string(const std::string& s) {
  if (s == "exact") return MatchKind::kExact;
  if (s == "contains") return MatchKind::kContains;
  if (s == "regex") return MatchKind::kRegex;
  throw invalid_input("InvalidMockRules", "unknown match kind '" + s + "'");
}

std::size_t tokens_of(const ChatRequest& r) {
  std::size_t n = 0;
  for (const auto& m : r.messages) n += corpus::count_tokens(m.content);
  return n;
}

}  // namespace

nlohmann::ordered_json to_json(const TranscriptEntry& e) {
  nlohmann::ordered_json j;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : e.messages) j["messages"].push_back(to_json(m));
  j["response"] = e.response;
  return j;
}

nlohmann::ordered_json transcript_json(const std::vector<TranscriptEntry>& entries) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& e : entries) j.push_back(to_json(e));
  return j;
}

MockBackend::MockBackend(std::vector<MockRule> rules) {
  if (rules.empty()) throw invalid_input("InvalidMockRules", "rule list is empty");
  for (auto& r : rules) {
    Compiled c{std::move(r), {}};
    if (c.rule.match == MatchKind::kRegex) {
      try {
        c.re = std::regex(c.rule.pattern, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw invalid_input("InvalidMockRules", "bad regex '" + c.rule.pattern + "': " + e.what());
      }
    }
    rules_.push_back(std::move(c));
  }
  const auto& last = rules_.back();
  if (last.rule.match == MatchKind::kExact || !matches(last.rule, last.re, "")) {
    throw invalid_input("InvalidMockRules", "the last rule must match every prompt");
  }
}

std::vector<MockRule> MockBackend::rules_from_json(const nlohmann::json& rules) {
  if (!rules.is_array()) throw invalid_input("InvalidMockRules", "rules must be a JSON list");
  std::vector<MockRule> out;
  try {
    for (const auto& j : rules) {
      out.push_back({kind_from_string(j.at("match").get<std::string>()), j.at("pattern").get<std::string>(),
                     j.at("response").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidMockRules", e.what());
  }
  return out;
}

std::vector<MockRule> MockBackend::rules_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open mock rules " + path.string());
  try {
    return rules_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw invalid_input("InvalidMockRules", path.string() + ": " + e.what());
  }
}

MockBackend MockBackend::from_json(const nlohmann::json& rules) { return MockBackend(rules_from_json(rules)); }

MockBackend MockBackend::from_file(const std::filesystem::path& path) { return MockBackend(rules_from_file(path)); }

std::string MockBackend::respond(const std::string& prompt) const {
  for (const auto& c : rules_) {
    if (!matches(c.rule, c.re, prompt)) continue;
    std::string out;
    const auto& r = c.rule.response;
    std::size_t pos = 0;
    for (auto hit = r.find(kEcho); hit != std::string::npos; hit = r.find(kEcho, pos)) {
      out.append(r, pos, hit - pos);
      out += prompt;
      pos = hit + kEcho.size();
    }
    out.append(r, pos);
    return out;
  }
  return {};  // unreachable: the last rule always matches
}

Completion MockBackend::complete(const ChatRequest& request) {
  request.validate();
  Completion c;
  c.content = respond(request.last_user_content());
  c.finish = Finish::kStop;
  c.tokens_in = tokens_of(request);
  c.tokens_out = corpus::count_tokens(c.content);
  std::lock_guard lock(mu_);
  transcript_.push_back({request.messages, c.content});
  return c;
}

Completion MockBackend::stream(const ChatRequest& request, const DeltaSink& on_delta) {
  auto c = complete(request);
  for (const auto& piece : stream_pieces(c.content)) on_delta(piece);
  return c;
}

std::vector<TranscriptEntry> MockBackend::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mu_);
  return transcript_.size();
}

void MockBackend::clear_transcript() {
  std::lock_guard lock(mu_);
  transcript_.clear();
}

std::vector<std::string> stream_pieces(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  bool in_space = false;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = utf8::decode_at(text, pos);
    const std::string_view raw = text.substr(pos, d.len);
    pos += d.len;
    const bool space = utf8::is_space(d.cp);
    if (!space && in_space) {
      out.push_back(std::move(cur));
      cur.clear();
    }
    in_space = space;
    if (!space && utf8::is_cjk(d.cp)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      out.emplace_back(raw);
      cur.clear();
      continue;
    }
    cur += raw;
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace litpilot::llm
