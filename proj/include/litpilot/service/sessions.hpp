#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace litpilot::service {

struct SessionMessage {
  std::string role;  // "user" | "assistant"
  std::string content;
  std::int64_t ts = 0;

  bool operator==(const SessionMessage&) const = default;
};

struct SessionRecord {
  std::string session_id;
  std::string kind;  // "investigate" | "read"
  std::vector<std::string> doc_ids;
  std::vector<SessionMessage> messages;
  std::int64_t created = 0;
  std::int64_t updated = 0;

  bool operator==(const SessionRecord&) const = default;
};

nlohmann::ordered_json to_json(const SessionRecord& s);

// One append-only JSON-lines file per session:
//   {"type":"session", session_id, kind, doc_ids, created}
//   {"type":"message", role, content, ts}  ...
// An exchange (user + assistant) is one write followed by fsync, so a crash
// leaves at most a torn tail, which the startup scan cuts off. index.json is
// a derived summary rewritten on startup and on every change.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  // Throws InvalidSessionKind.
  SessionRecord create(const std::string& kind, std::vector<std::string> doc_ids);
  std::optional<SessionRecord> get(const std::string& id) const;
  std::vector<std::string> ids() const;

  // Throws UnknownSession; persisted before returning.
  void append_exchange(const std::string& id, const std::string& user, const std::string& assistant);

  // One in-flight chat turn per session. False when a turn is already running.
  bool try_begin_turn(const std::string& id);
  void end_turn(const std::string& id);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_of(const std::string& id) const;
  void write_index() const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, SessionRecord> sessions_;
  std::set<std::string> busy_;
};

// Random 128-bit id as 32 lowercase hex characters.
std::string new_session_id();

}  // namespace litpilot::service
