#include "litpilot/llm/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "litpilot/error.hpp"

namespace litpilot::llm {
namespace {

bool slot_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool slot_char(char c) { return slot_start(c) || (c >= '0' && c <= '9'); }

// Calls fn(literal_before, slot_name) for each placeholder, then fn(tail, "").
template <typename Fn>
void scan(std::string_view body, Fn fn) {
  std::size_t lit = 0;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{' && i + 1 < body.size() && slot_start(body[i + 1])) {
      std::size_t j = i + 1;
      while (j < body.size() && slot_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}') {
        fn(body.substr(lit, i - lit), body.substr(i + 1, j - i - 1));
        i = lit = j + 1;
        continue;
      }
    }
    ++i;
  }
  fn(body.substr(lit), std::string_view{});
}

// Drops leading blank lines and all trailing whitespace.
std::string strip_blank_edges(std::string s) {
  std::size_t start = 0;
  for (std::size_t nl; (nl = s.find('\n', start)) != std::string::npos;) {
    if (s.find_first_not_of(" \t\r", start) < nl) break;
    start = nl + 1;
  }
  s.erase(0, start);
  const auto last = s.find_last_not_of(" \t\r\n");
  s.erase(last == std::string::npos ? 0 : last + 1);
  return s;
}

}  // namespace

std::set<std::string> PromptTemplate::slots() const {
  std::set<std::string> out;
  scan(body, [&](std::string_view, std::string_view name) {
    if (!name.empty()) out.emplace(name);
  });
  return out;
}

std::string render(const PromptTemplate& tmpl, const Slots& slots) {
  const auto names = tmpl.slots();
  for (const auto& n : names) {
    if (!slots.count(n)) throw invalid_input("MissingSlot", n);
  }
  for (const auto& [k, v] : slots) {
    if (!names.count(k)) throw invalid_input("UnknownSlot", k);
  }
  std::string out;
  for (const auto& [in, ex] : tmpl.exemplars) {
    out += "Example input: " + in + "\nExample output: " + ex + "\n\n";
  }
  scan(tmpl.body, [&](std::string_view literal, std::string_view name) {
    out += literal;
    if (!name.empty()) out += slots.at(std::string(name));
  });
  return out;
}

PromptTemplate parse_template_file(const std::string& name, const std::string& content) {
  PromptTemplate t;
  t.name = name;
  enum class Part { kNone, kBody, kInput, kOutput } part = Part::kNone;
  std::string cur;
  bool have_body = false;
  std::string pending_input;
  bool have_input = false;

  const auto flush = [&] {
    std::string text = strip_blank_edges(cur);
    cur.clear();
    switch (part) {
      case Part::kNone: break;
      case Part::kBody:
        t.body = std::move(text);
        have_body = true;
        break;
      case Part::kInput:
        pending_input = std::move(text);
        have_input = true;
        break;
      case Part::kOutput:
        t.exemplars.emplace_back(std::move(pending_input), std::move(text));
        have_input = false;
        break;
    }
  };

  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("@@", 0) == 0) {
      flush();
      const std::string marker = line.substr(2);
      if (marker == "template") {
        part = Part::kBody;
      } else if (marker == "input") {
        if (have_input) throw invalid_input("InvalidTemplate", name + ": @@input without @@output");
        part = Part::kInput;
      } else if (marker == "output") {
        if (!have_input) throw invalid_input("InvalidTemplate", name + ": @@output without @@input");
        part = Part::kOutput;
      } else {
        throw invalid_input("InvalidTemplate", name + ": unknown marker @@" + marker);
      }
      continue;
    }
    if (part == Part::kNone) {
      if (line.empty() || line[0] == '#') continue;
      throw invalid_input("InvalidTemplate", name + ": text before the first marker");
    }
    cur += line;
    cur += '\n';
  }
  flush();
  if (have_input) throw invalid_input("InvalidTemplate", name + ": @@input without @@output");
  if (!have_body || t.body.empty()) throw invalid_input("InvalidTemplate", name + ": no @@template body");
  return t;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw io_error("prompt directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  PromptLibrary lib;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw io_error("cannot read " + f.string());
    std::stringstream ss;
    ss << in.rdbuf();
    lib.add(parse_template_file(f.stem().string(), ss.str()));
  }
  return lib;
}

PromptLibrary PromptLibrary::load_default() { return load(LITPILOT_DEFAULT_PROMPTS_DIR); }

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) throw invalid_input("UnknownTemplate", name);
  return it->second;
}

void PromptLibrary::add(PromptTemplate t) {
  auto name = t.name;
  templates_[name] = std::move(t);
}

std::string PromptLibrary::render(const std::string& name, const Slots& slots) const {
  return llm::render(get(name), slots);
}

}  // namespace litpilot::llm
