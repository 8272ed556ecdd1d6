#pragma once

// Independent greedy splitter used as an oracle for the chunker. It works on
// ASCII prose only (space/newline separated words), which is what the
// fixtures feed it.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace litpilot::testing {

struct ReferenceWindow {
  std::size_t first;
  std::size_t last;
};

inline std::vector<std::string> ascii_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\t') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

// Greedy: take as many whole sentences as fit in max_tokens; if not even one
// useful sentence boundary fits, cut at max_tokens. The next window restarts
// `overlap` words before the cut. A short tail borrows tokens from its predecessor.
inline std::vector<ReferenceWindow> reference_windows(const std::string& text, std::size_t max_tokens,
                                                      std::size_t overlap, std::size_t min_tokens) {
  const auto words = ascii_words(text);
  const std::size_t n = words.size();
  std::vector<bool> starts_sentence(n + 1, false);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const char last = words[i].back();
    if (last == '.' || last == '!' || last == '?') starts_sentence[i + 1] = true;
  }

  std::vector<ReferenceWindow> out;
  std::size_t cur = 0;
  while (n > 0) {
    if (cur + max_tokens >= n) {
      out.push_back({cur, n});
      break;
    }
    std::size_t cut = cur + max_tokens;
    for (std::size_t b = cur + max_tokens; b > cur + overlap; --b) {
      if (starts_sentence[b]) {
        cut = b;
        break;
      }
    }
    out.push_back({cur, cut});
    cur = cut - overlap;
  }
  if (out.size() > 1) {
    auto& prev = out[out.size() - 2];
    auto& tail = out.back();
    // Move the previous cut back one token at a time while the tail is short,
    // the tail still fits, and the previous window keeps a fresh token.
    while (tail.last - prev.last < min_tokens && tail.last - tail.first < max_tokens &&
           prev.last - 1 > prev.first + overlap) {
      prev.last -= 1;
      tail.first = prev.last - overlap;
    }
  }
  return out;
}

}  // namespace litpilot::testing
