#include "litpilot/util/utf8.hpp"

namespace litpilot::utf8 {

Decoded decode_at(std::string_view text, std::size_t pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  const unsigned char b0 = byte(pos);
  if (b0 < 0x80) return {b0, 1};

  std::size_t len = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    return {kReplacement, 1};
  }
  if (pos + len > text.size()) return {kReplacement, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const unsigned char b = byte(pos + i);
    if ((b & 0xC0) != 0x80) return {kReplacement, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return {kReplacement, 1};
  return {cp, len};
}

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x3000 && cp <= 0x303F) ||   // CJK symbols and punctuation
         (cp >= 0x3040 && cp <= 0x30FF) ||   // hiragana, katakana
         (cp >= 0x3400 && cp <= 0x4DBF) ||   // extension A
         (cp >= 0x4E00 && cp <= 0x9FFF) ||   // unified ideographs
         (cp >= 0xAC00 && cp <= 0xD7AF) ||   // hangul syllables
         (cp >= 0xF900 && cp <= 0xFAFF) ||   // compatibility ideographs
         (cp >= 0xFF00 && cp <= 0xFFEF) ||   // half/full-width forms
         (cp >= 0x20000 && cp <= 0x2FA1F);   // extensions B-F, supplement
}

bool is_space(char32_t cp) {
  switch (cp) {
    case ' ':
    case '\t':
    case '\n':
    case '\r':
    case '\v':
    case '\f':
    case 0x00A0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_alpha(char32_t cp) { return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z'); }

bool is_ascii_alnum(char32_t cp) { return is_ascii_alpha(cp) || (cp >= '0' && cp <= '9'); }

bool is_latin_letter(char32_t cp) {
  if (is_ascii_alpha(cp)) return true;
  if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
  return false;
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) return is_ascii_alnum(cp);
  if (is_cjk(cp) || is_space(cp)) return false;
  if (cp >= 0x80 && cp <= 0xBF) return false;      // Latin-1 controls and symbols
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, arrows, math, box
  if (cp == kReplacement) return false;
  return true;
}

namespace {

char32_t cp_before(std::string_view s, std::size_t pos) {
  if (pos == 0) return 0;
  std::size_t start = pos - 1;
  while (start > 0 && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) --start;
  return decode_at(s, start).cp;
}

char32_t cp_at(std::string_view s, std::size_t pos) { return pos < s.size() ? decode_at(s, pos).cp : 0; }

}  // namespace

bool at_word_boundaries(std::string_view s, std::size_t begin, std::size_t end) {
  const auto word = [](char32_t cp) { return cp != 0 && is_word_char(cp); };
  const bool left = !word(cp_before(s, begin)) || !word(cp_at(s, begin));
  const bool right = !word(cp_at(s, end)) || !word(cp_before(s, end));
  return left && right;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string ascii_upper(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  while (begin < text.size()) {
    const auto d = decode_at(text, begin);
    if (!is_space(d.cp)) break;
    begin += d.len;
  }
  std::size_t end = text.size();
  while (end > begin) {
    // Walk back to the start of the previous code point.
    std::size_t start = end - 1;
    while (start > begin && (static_cast<unsigned char>(text[start]) & 0xC0) == 0x80) --start;
    const auto d = decode_at(text, start);
    if (!is_space(d.cp) || start + d.len != end) break;
    end = start;
  }
  return text.substr(begin, end - begin);
}

std::string sanitize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const auto d = decode_at(text, pos);
    if (d.cp == kReplacement && d.len == 1 && static_cast<unsigned char>(text[pos]) >= 0x80) {
      append(out, kReplacement);
    } else {
      out.append(text.substr(pos, d.len));
    }
    pos += d.len;
  }
  return out;
}

std::size_t codepoint_count(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < text.size(); pos += decode_at(text, pos).len) ++n;
  return n;
}

std::string_view prefix_codepoints(std::string_view text, std::size_t max_codepoints) {
  std::size_t pos = 0;
  for (std::size_t n = 0; n < max_codepoints && pos < text.size(); ++n) pos += decode_at(text, pos).len;
  return text.substr(0, pos);
}

}  // namespace litpilot::utf8
