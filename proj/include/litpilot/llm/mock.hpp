#pragma once

#include <filesystem>
#include <mutex>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "litpilot/llm/backend.hpp"

namespace litpilot::llm {

enum class MatchKind { kExact, kContains, kRegex };

// Matched against the last user message. A response may contain {{prompt}},
// which is replaced by that message (an echo backend is one catch-all rule
// whose response is "{{prompt}}").
struct MockRule {
  MatchKind match = MatchKind::kContains;
  std::string pattern;
  std::string response;
};

struct TranscriptEntry {
  std::vector<ChatMessage> messages;
  std::string response;
};

nlohmann::ordered_json to_json(const TranscriptEntry& e);
nlohmann::ordered_json transcript_json(const std::vector<TranscriptEntry>& entries);

// Scripted, deterministic backend: the first matching rule answers. The last
// rule must match any prompt (contains "" or a regex that matches the empty
// string). Every exchange is appended to a transcript.
class MockBackend : public Backend {
 public:
  // Throws InvalidMockRules (bad regex, no terminal catch-all, empty list).
  explicit MockBackend(std::vector<MockRule> rules);

  // JSON list of {match, pattern, response}.
  static MockBackend from_json(const nlohmann::json& rules);
  static MockBackend from_file(const std::filesystem::path& path);
  static std::vector<MockRule> rules_from_json(const nlohmann::json& rules);
  static std::vector<MockRule> rules_from_file(const std::filesystem::path& path);

  std::string name() const override { return "mock"; }
  Completion complete(const ChatRequest& request) override;
  // Deltas are whitespace-delimited words (trailing whitespace attached) and
  // single CJK characters.
  Completion stream(const ChatRequest& request, const DeltaSink& on_delta) override;

  std::vector<TranscriptEntry> transcript() const;
  std::size_t call_count() const;
  void clear_transcript();

 private:
  struct Compiled {
    MockRule rule;
    std::regex re;
  };
  std::string respond(const std::string& prompt) const;

  std::vector<Compiled> rules_;
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> transcript_;
};

// Splits text into the increments the mock streams.
std::vector<std::string> stream_pieces(std::string_view text);

}  // namespace litpilot::llm
