#include "litpilot/corpus/chunker.hpp"

#include <algorithm>

#include "litpilot/corpus/text.hpp"
#include "litpilot/error.hpp"
#include "litpilot/util/hash.hpp"
#include "litpilot/util/utf8.hpp"

namespace litpilot::corpus {
namespace {

bool is_cjk_terminator(char32_t cp) { return cp == 0x3002 || cp == 0xFF01 || cp == 0xFF1F; }

char32_t last_codepoint(std::string_view token) {
  std::size_t start = token.size() - 1;
  while (start > 0 && (static_cast<unsigned char>(token[start]) & 0xC0) == 0x80) --start;
  return utf8::decode_at(token, start).cp;
}

}  // namespace

void ChunkPolicy::validate() const {
  if (max_tokens == 0) throw invalid_input("InvalidChunkPolicy", "max_tokens must be positive");
  if (overlap_tokens >= max_tokens) {
    throw invalid_input("InvalidChunkPolicy", "overlap_tokens must be smaller than max_tokens");
  }
  if (min_tokens > max_tokens) throw invalid_input("InvalidChunkPolicy", "min_tokens must not exceed max_tokens");
}

std::vector<std::size_t> sentence_starts(const std::string& body) {
  const auto spans = token_spans(body);
  std::vector<std::size_t> starts;
  for (std::size_t j = 0; j + 1 < spans.size(); ++j) {
    const std::string_view token(body.data() + spans[j].begin, spans[j].end - spans[j].begin);
    const char32_t cp = last_codepoint(token);
    bool ends_sentence = false;
    if (spans[j].cjk) {
      // Full-width terminators are not followed by spaces in running CJK text.
      ends_sentence = is_cjk_terminator(cp);
    } else if (cp == '.' || cp == '!' || cp == '?') {
      const std::size_t after = spans[j].end;
      ends_sentence = after == body.size() || utf8::is_space(utf8::decode_at(body, after).cp);
    }
    if (ends_sentence) starts.push_back(j + 1);
  }
  return starts;
}

std::vector<TokenWindow> plan_windows(const std::string& body, const ChunkPolicy& policy) {
  policy.validate();
  const std::size_t n = count_tokens(body);
  std::vector<TokenWindow> windows;
  if (n == 0) return windows;
  const auto starts = sentence_starts(body);

  std::size_t first = 0;
  while (true) {
    if (n - first <= policy.max_tokens) {
      windows.push_back({first, n});
      break;
    }
    const std::size_t limit = first + policy.max_tokens;
    // Latest sentence start that fits and still lets the next window advance.
    std::size_t last = limit;
    auto it = std::upper_bound(starts.begin(), starts.end(), limit);
    if (it != starts.begin()) {
      const std::size_t candidate = *std::prev(it);
      if (candidate > first + policy.overlap_tokens) last = candidate;
    }
    windows.push_back({first, last});
    first = last - policy.overlap_tokens;
  }

  // A short tail cannot be folded into its predecessor without exceeding
  // max_tokens, so the predecessor's cut moves back to give the tail
  // min_tokens fresh tokens where possible.
  if (windows.size() >= 2) {
    TokenWindow& tail = windows.back();
    TokenWindow& prev = windows[windows.size() - 2];
    const std::size_t fresh = tail.last - prev.last;
    if (fresh < policy.min_tokens) {
      std::size_t shift = policy.min_tokens - fresh;
      shift = std::min(shift, policy.max_tokens - policy.overlap_tokens - fresh);
      const std::size_t prev_new = prev.last - prev.first - policy.overlap_tokens;
      shift = std::min(shift, prev_new > 0 ? prev_new - 1 : 0);
      prev.last -= shift;
      tail.first = prev.last - policy.overlap_tokens;
    }
  }
  return windows;
}

std::vector<Chunk> split_into_chunks(const PaperDocument& doc, const ChunkPolicy& policy) {
  policy.validate();
  std::vector<Chunk> chunks;
  std::size_t ordinal = 0;
  for_each_section(doc.sections, [&](const Section& section, const std::vector<std::string>& path) {
    const std::size_t section_ordinal = ordinal++;
    const std::string& body = section.body;
    const auto spans = token_spans(body);
    const auto windows = plan_windows(body, policy);
    std::size_t prev_end = 0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const auto& win = windows[w];
      Chunk c;
      c.doc_id = doc.doc_id;
      c.section_path = path;
      c.start = w == 0 ? 0 : spans[win.first].begin;
      c.end = win.last == spans.size() ? body.size() : spans[win.last].begin;
      c.overlap_bytes = w == 0 ? 0 : prev_end - c.start;
      c.text = body.substr(c.start, c.end - c.start);
      c.token_count = win.last - win.first;
      std::string key = doc.doc_id;
      key += '\x1f';
      key += std::to_string(section_ordinal);
      for (const auto& h : path) {
        key += '\x1e';
        key += h;
      }
      key += '\x1f' + std::to_string(c.start) + '\x1f' + std::to_string(c.end);
      c.chunk_id = content_id(key);
      prev_end = c.end;
      chunks.push_back(std::move(c));
    }
  });
  return chunks;
}

nlohmann::ordered_json to_json(const Chunk& c) {
  nlohmann::ordered_json j;
  j["chunk_id"] = c.chunk_id;
  j["doc_id"] = c.doc_id;
  j["section_path"] = c.section_path;
  j["char_span"] = {c.start, c.end};
  j["overlap_bytes"] = c.overlap_bytes;
  j["text"] = c.text;
  j["token_count"] = c.token_count;
  return j;
}

Chunk chunk_from_json(const nlohmann::json& j) {
  Chunk c;
  try {
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.section_path = j.at("section_path").get<std::vector<std::string>>();
    c.start = j.at("char_span").at(0).get<std::size_t>();
    c.end = j.at("char_span").at(1).get<std::size_t>();
    c.overlap_bytes = j.value("overlap_bytes", std::size_t{0});
    c.text = j.at("text").get<std::string>();
    c.token_count = j.at("token_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw invalid_input("InvalidChunk", e.what());
  }
  return c;
}

}  // namespace litpilot::corpus
