#include "litpilot/corpus/text.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

#include "litpilot/util/utf8.hpp"

namespace litpilot::corpus {
namespace {

bool is_dropped_control(char32_t cp) {
  if (cp == '\n' || cp == '\t') return false;
  if (cp < 0x20 || cp == 0x7F) return true;
  if (cp >= 0x80 && cp <= 0x9F) return true;
  // zero-width space/joiners and the byte-order mark
  return cp == 0x200B || cp == 0x200C || cp == 0x200D || cp == 0x2060 || cp == 0xFEFF;
}

// Collapses horizontal whitespace to single spaces and trims both ends.
std::string normalize_line(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  bool pending_space = false;
  for (std::size_t pos = 0; pos < line.size();) {
    const auto d = utf8::decode_at(line, pos);
    pos += d.len;
    if (is_dropped_control(d.cp)) continue;
    if (utf8::is_space(d.cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    utf8::append(out, d.cp);
  }
  return out;
}

// Code point ending at byte offset `end` (exclusive).
char32_t last_codepoint(std::string_view text) {
  if (text.empty()) return 0;
  std::size_t start = text.size() - 1;
  while (start > 0 && (static_cast<unsigned char>(text[start]) & 0xC0) == 0x80) --start;
  return utf8::decode_at(text, start).cp;
}

std::string join_hyphenation(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    if (text[pos] == '-' && pos + 1 < text.size() && text[pos + 1] == '\n' && pos + 2 < text.size()) {
      const char32_t before = last_codepoint(out);
      const char32_t after = utf8::decode_at(text, pos + 2).cp;
      if (utf8::is_latin_letter(before) && utf8::is_latin_letter(after)) {
        pos += 2;
        continue;
      }
    }
    out.push_back(text[pos]);
    ++pos;
  }
  return out;
}

bool is_cjk_letter(char32_t cp) {
  if (!utf8::is_cjk(cp)) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFF00 && cp <= 0xFFEF) {
    return (cp >= 0xFF10 && cp <= 0xFF19) || (cp >= 0xFF21 && cp <= 0xFF3A) ||
           (cp >= 0xFF41 && cp <= 0xFF5A) || (cp >= 0xFF66 && cp <= 0xFFDC);
  }
  return true;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  // Split into pages of lines, normalizing line endings on the way.
  std::vector<std::vector<std::string>> pages(1);
  std::string current;
  const auto flush_line = [&] {
    pages.back().push_back(normalize_line(current));
    current.clear();
  };
  for (std::size_t pos = 0; pos < raw.size(); ++pos) {
    const char c = raw[pos];
    if (c == '\r') {
      if (pos + 1 < raw.size() && raw[pos + 1] == '\n') ++pos;
      flush_line();
    } else if (c == '\n') {
      flush_line();
    } else if (c == '\f') {
      flush_line();
      pages.emplace_back();
    } else {
      current.push_back(c);
    }
  }
  flush_line();

  std::set<std::string> running_headers;
  if (pages.size() >= 3) {
    std::map<std::string, std::size_t> page_counts;
    for (const auto& page : pages) {
      std::set<std::string> seen;
      for (const auto& line : page) {
        if (!line.empty() && seen.insert(line).second) ++page_counts[line];
      }
    }
    for (const auto& [line, count] : page_counts) {
      if (count >= 3) running_headers.insert(line);
    }
  }

  std::string joined;
  joined.reserve(raw.size());
  bool first = true;
  for (const auto& page : pages) {
    for (const auto& line : page) {
      if (running_headers.count(line)) continue;
      if (!first) joined.push_back('\n');
      joined += line;
      first = false;
    }
  }
  return join_hyphenation(joined);
}

std::vector<TokenSpan> token_spans(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t word_begin = std::string_view::npos;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = utf8::decode_at(text, pos);
    const bool space = utf8::is_space(d.cp);
    const bool cjk = utf8::is_cjk(d.cp);
    if ((space || cjk) && word_begin != std::string_view::npos) {
      spans.push_back({word_begin, pos, false});
      word_begin = std::string_view::npos;
    }
    if (cjk) {
      spans.push_back({pos, pos + d.len, true});
    } else if (!space && word_begin == std::string_view::npos) {
      word_begin = pos;
    }
    pos += d.len;
  }
  if (word_begin != std::string_view::npos) spans.push_back({word_begin, text.size(), false});
  return spans;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : token_spans(text)) out.emplace_back(text.substr(s.begin, s.end - s.begin));
  return out;
}

std::size_t count_tokens(std::string_view text) { return token_spans(text).size(); }

std::string_view first_tokens(std::string_view text, std::size_t max_tokens) {
  const auto spans = token_spans(text);
  if (spans.size() <= max_tokens) return utf8::trim(text);
  if (max_tokens == 0) return {};
  return text.substr(spans.front().begin, spans[max_tokens - 1].end - spans.front().begin);
}

std::vector<TermSpan> term_spans(std::string_view text) {
  std::vector<TermSpan> out;
  std::size_t word_begin = std::string_view::npos;
  const auto close_word = [&](std::size_t end) {
    if (word_begin == std::string_view::npos) return;
    out.push_back({word_begin, end, utf8::ascii_lower(text.substr(word_begin, end - word_begin))});
    word_begin = std::string_view::npos;
  };
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = utf8::decode_at(text, pos);
    if (is_cjk_letter(d.cp)) {
      close_word(pos);
      out.push_back({pos, pos + d.len, std::string(text.substr(pos, d.len))});
    } else if (utf8::is_word_char(d.cp)) {
      if (word_begin == std::string_view::npos) word_begin = pos;
    } else {
      close_word(pos);
    }
    pos += d.len;
  }
  close_word(text.size());
  return out;
}

std::vector<std::string> terms(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : term_spans(text)) out.push_back(std::move(t.term));
  return out;
}

bool is_stopword(std::string_view term) {
  static const std::unordered_set<std::string_view> kStopwords = {
      // English
      "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as",
      "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
      "can", "could", "did", "do", "does", "doing", "done", "down", "during", "each", "few", "for",
      "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
      "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most",
      "my", "no", "nor", "not", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
      "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
      "their", "theirs", "them", "then", "there", "these", "they", "this", "those", "through", "to",
      "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
      "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
      // Chinese function characters
      "的", "了", "在", "是", "和", "与", "及", "或", "有", "我", "你", "他", "她", "它", "们", "这",
      "那", "哪", "些", "什", "么", "吗", "呢", "吧", "啊", "对", "为", "从", "等", "被", "把", "也",
      "就", "都", "而", "且", "之", "其", "于", "以"};
  return kStopwords.count(term) > 0;
}

}  // namespace litpilot::corpus
