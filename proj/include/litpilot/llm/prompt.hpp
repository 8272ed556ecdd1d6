#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace litpilot::llm {

struct PromptTemplate {
  std::string name;
  std::string body;  // {slot} placeholders; a slot name is [A-Za-z_][A-Za-z0-9_]*
  std::vector<std::pair<std::string, std::string>> exemplars;  // (input, output)

  // Placeholder names occurring in the body.
  std::set<std::string> slots() const;
};

using Slots = std::map<std::string, std::string>;

// Exemplars as "Example input: ...\nExample output: ...\n\n" blocks in order,
// then the body with each placeholder replaced by its slot value. Values are
// inserted verbatim and never rescanned. Throws MissingSlot / UnknownSlot.
std::string render(const PromptTemplate& tmpl, const Slots& slots);

// Directory of "<name>.txt" template files.
//
// File layout: optional "#" comment lines, then
//   @@template      (body follows until the next marker)
//   @@input         (exemplar input)
//   @@output        (exemplar output, pairs with the preceding @@input)
// Leading and trailing blank lines of every part are dropped.
class PromptLibrary {
 public:
  PromptLibrary() = default;
  static PromptLibrary load(const std::filesystem::path& dir);
  // Directory baked in at build time.
  static PromptLibrary load_default();

  const PromptTemplate& get(const std::string& name) const;  // throws UnknownTemplate
  bool contains(const std::string& name) const { return templates_.count(name) > 0; }
  void add(PromptTemplate t);
  std::string render(const std::string& name, const Slots& slots) const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

PromptTemplate parse_template_file(const std::string& name, const std::string& content);

}  // namespace litpilot::llm
