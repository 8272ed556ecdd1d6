#pragma once

// Paths and loaders for the checked-in fixtures under tests/fixtures, plus the
// golden-file check (LITPILOT_UPDATE_GOLDEN=1 rewrites instead of comparing).

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "litpilot/error.hpp"
#include "litpilot/kb/knowledge_base.hpp"
#include "litpilot/llm/mock.hpp"
#include "litpilot/llm/prompt.hpp"
#include "litpilot/query/query.hpp"
#include "litpilot/writing/writing.hpp"

namespace litpilot::testing {

inline std::filesystem::path test_data() { return LITPILOT_TEST_DATA; }
inline std::filesystem::path fixture(const std::string& name) { return test_data() / "fixtures" / name; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

inline std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

inline std::optional<long> limit_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.limit();
  }
  return std::nullopt;
}

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("litpilot-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::vector<std::filesystem::path> paper_files() {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(fixture("papers"))) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

// Ingests every fixture paper; returns file stem -> doc_id.
inline std::map<std::string, std::string> ingest_papers(kb::KnowledgeBase& kb) {
  std::map<std::string, std::string> ids;
  for (const auto& f : paper_files()) {
    ids[f.stem().string()] = kb.ingest_source(read_file(f), corpus::SourceFormat::kMarkdown, f.filename().string());
  }
  return ids;
}

inline std::shared_ptr<llm::MockBackend> mock_backend() {
  return std::make_shared<llm::MockBackend>(llm::MockBackend::rules_from_file(fixture("mock_rules.json")));
}

inline query::Gazetteer gazetteer() { return query::Gazetteer::load(fixture("gazetteer.tsv")); }
inline writing::Lexicon lexicon() { return writing::Lexicon::load(fixture("lexicon.tsv")); }

inline bool updating_golden() {
  const char* v = std::getenv("LITPILOT_UPDATE_GOLDEN");
  return v && *v && std::string(v) != "0";
}

// Byte comparison against tests/golden/<name>.
inline bool golden_matches(const std::string& name, const std::string& actual) {
  const auto path = test_data() / "golden" / name;
  if (updating_golden()) {
    write_file(path, actual);
    return true;
  }
  if (!std::filesystem::exists(path)) return false;
  return read_file(path) == actual;
}

inline void check_golden(const std::string& name, const std::string& actual) {
  INFO("golden file: " << name);
  CHECK(golden_matches(name, actual));
}

}  // namespace litpilot::testing
