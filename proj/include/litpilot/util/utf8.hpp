#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace litpilot::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes the code point starting at `pos`. Invalid or truncated sequences
// decode as U+FFFD with length 1 so callers always make progress.
struct Decoded {
  char32_t cp;
  std::size_t len;
};
Decoded decode_at(std::string_view text, std::size_t pos);

void append(std::string& out, char32_t cp);

// CJK ideographs, kana, hangul, CJK symbols/punctuation and full-width forms.
// Each of these counts as a token on its own.
bool is_cjk(char32_t cp);

// ASCII whitespace plus the common Unicode space separators.
bool is_space(char32_t cp);

bool is_ascii_alpha(char32_t cp);
bool is_ascii_alnum(char32_t cp);

// Letters used by the hyphenation join: ASCII letters and Latin-1/Latin
// Extended-A/B letters.
bool is_latin_letter(char32_t cp);

// Characters that are part of a word for term extraction: ASCII alnum and
// non-ASCII, non-CJK letters outside the general punctuation blocks.
bool is_word_char(char32_t cp);

// True when [begin, end) does not cut through a run of word characters.
// CJK characters count as boundaries on their own.
bool at_word_boundaries(std::string_view text, std::size_t begin, std::size_t end);

std::string ascii_lower(std::string_view text);
std::string ascii_upper(std::string_view text);

// Trims ASCII/Unicode whitespace on both ends.
std::string_view trim(std::string_view text);

// Replaces invalid byte sequences with U+FFFD.
std::string sanitize(std::string_view text);

std::size_t codepoint_count(std::string_view text);

// Longest prefix of `text` holding at most `max_codepoints` code points.
std::string_view prefix_codepoints(std::string_view text, std::size_t max_codepoints);

}  // namespace litpilot::utf8
