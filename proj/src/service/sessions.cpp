#include "litpilot/service/sessions.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "litpilot/error.hpp"

namespace litpilot::service {
namespace {

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void write_all_synced(const std::filesystem::path& path, const std::string& data, bool append) {
  const int flags = O_WRONLY | O_CREAT | O_CLOEXEC | (append ? O_APPEND : O_TRUNC);
  const int fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) throw io_error("cannot open " + path.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw io_error("write failed for " + path.string() + ": " + std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw io_error("fsync failed for " + path.string() + ": " + std::strerror(err));
  }
  ::close(fd);
}

void sync_dir(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

std::string message_line(const SessionMessage& m) {
  nlohmann::ordered_json j;
  j["type"] = "message";
  j["role"] = m.role;
  j["content"] = m.content;
  j["ts"] = m.ts;
  return j.dump() + "\n";
}

// Reads one session file. A torn tail (unparsable last line, or a user
// message with no reply) is cut off on disk.
std::optional<SessionRecord> scan_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  SessionRecord rec;
  bool have_header = false;
  std::size_t good_end = 0;  // bytes of fully accepted content
  std::size_t pos = 0;
  std::size_t pending_user_end = std::string::npos;  // set while a user line awaits its reply
  std::size_t before_pending = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const auto line = text.substr(pos, complete ? nl - pos : std::string::npos);
    const auto next = complete ? nl + 1 : text.size();
    nlohmann::json j;
    bool ok = complete;
    if (ok) {
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        ok = false;
      }
    }
    if (!ok) {
      if (next < text.size()) throw io_error("corrupt session file " + path.string());
      break;  // torn tail
    }
    try {
      if (!have_header) {
        if (j.at("type") != "session") throw io_error("session file without header: " + path.string());
        rec.session_id = j.at("session_id").get<std::string>();
        rec.kind = j.at("kind").get<std::string>();
        rec.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
        rec.created = rec.updated = j.at("created").get<std::int64_t>();
        have_header = true;
        good_end = next;
      } else {
        SessionMessage m{j.at("role").get<std::string>(), j.at("content").get<std::string>(),
                         j.at("ts").get<std::int64_t>()};
        if (m.role == "user") {
          if (pending_user_end != std::string::npos) throw io_error("unpaired messages in " + path.string());
          before_pending = good_end;
          pending_user_end = next;
        } else {
          if (pending_user_end == std::string::npos) throw io_error("unpaired messages in " + path.string());
          pending_user_end = std::string::npos;
        }
        rec.messages.push_back(std::move(m));
        rec.updated = rec.messages.back().ts;
        good_end = next;
      }
    } catch (const nlohmann::json::exception& e) {
      throw io_error("bad record in " + path.string() + ": " + e.what());
    }
    pos = next;
  }
  if (!have_header) return std::nullopt;
  if (pending_user_end != std::string::npos) {
    rec.messages.pop_back();
    rec.updated = rec.messages.empty() ? rec.created : rec.messages.back().ts;
    good_end = before_pending;
  }
  if (good_end < text.size()) std::filesystem::resize_file(path, good_end);
  return rec;
}

}  // namespace

nlohmann::ordered_json to_json(const SessionRecord& s) {
  nlohmann::ordered_json j;
  j["session_id"] = s.session_id;
  j["kind"] = s.kind;
  j["doc_ids"] = s.doc_ids;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : s.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}, {"ts", m.ts}});
  j["created"] = s.created;
  j["updated"] = s.updated;
  return j;
}

std::string new_session_id() {
  static std::mutex mu;
  static std::random_device rd;
  std::lock_guard lock(mu);
  std::string out;
  char buf[9];
  for (int i = 0; i < 4; ++i) {
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    out += buf;
  }
  return out;
}

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".jsonl") continue;
    if (auto rec = scan_file(entry.path())) sessions_[rec->session_id] = std::move(*rec);
  }
  write_index();
}

std::filesystem::path SessionStore::file_of(const std::string& id) const { return dir_ / (id + ".jsonl"); }

void SessionStore::write_index() const {
  auto list = nlohmann::ordered_json::array();
  for (const auto& [id, s] : sessions_) {
    list.push_back({{"session_id", id},
                    {"kind", s.kind},
                    {"doc_ids", s.doc_ids},
                    {"messages", s.messages.size()},
                    {"created", s.created},
                    {"updated", s.updated}});
  }
  const auto tmp = dir_ / "index.json.tmp";
  write_all_synced(tmp, nlohmann::ordered_json{{"sessions", list}}.dump(2) + "\n", false);
  std::filesystem::rename(tmp, dir_ / "index.json");
}

SessionRecord SessionStore::create(const std::string& kind, std::vector<std::string> doc_ids) {
  if (kind != "investigate" && kind != "read") {
    throw invalid_input("InvalidSessionKind", "kind must be investigate or read, got '" + kind + "'");
  }
  SessionRecord rec;
  rec.kind = kind;
  rec.doc_ids = std::move(doc_ids);
  rec.created = rec.updated = now_seconds();
  std::lock_guard lock(mu_);
  do {
    rec.session_id = new_session_id();
  } while (sessions_.count(rec.session_id));
  nlohmann::ordered_json head;
  head["type"] = "session";
  head["session_id"] = rec.session_id;
  head["kind"] = rec.kind;
  head["doc_ids"] = rec.doc_ids;
  head["created"] = rec.created;
  write_all_synced(file_of(rec.session_id), head.dump() + "\n", true);
  sync_dir(dir_);
  sessions_[rec.session_id] = rec;
  write_index();
  return rec;
}

std::optional<SessionRecord> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

void SessionStore::append_exchange(const std::string& id, const std::string& user, const std::string& assistant) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found("UnknownSession", "no session " + id);
  const auto ts = now_seconds();
  const SessionMessage u{"user", user, ts}, a{"assistant", assistant, ts};
  write_all_synced(file_of(id), message_line(u) + message_line(a), true);
  it->second.messages.push_back(u);
  it->second.messages.push_back(a);
  it->second.updated = ts;
  write_index();
}

bool SessionStore::try_begin_turn(const std::string& id) {
  std::lock_guard lock(mu_);
  return busy_.insert(id).second;
}

void SessionStore::end_turn(const std::string& id) {
  std::lock_guard lock(mu_);
  busy_.erase(id);
}

}  // namespace litpilot::service
