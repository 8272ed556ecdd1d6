#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace litpilot::corpus {

// Normalizes extracted paper text:
//  - CRLF / CR become LF; form feeds separate pages and become LF
//  - control characters are dropped, invalid UTF-8 becomes U+FFFD
//  - horizontal whitespace runs collapse to one space, lines are trimmed
//  - non-empty lines occurring on >= 3 pages are dropped (running headers)
//  - "xxx-\nyyy" is joined to "xxxyyy" when both sides are letters
// clean_text(clean_text(x)) == clean_text(x).
std::string clean_text(std::string_view raw);

// Byte span of one token in the source string.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool cjk = false;
};

// Token model shared by chunking and BLEU: whitespace-delimited words for
// Latin script, one token per CJK character.
std::vector<TokenSpan> token_spans(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);
std::size_t count_tokens(std::string_view text);

// Text of the first `max_tokens` tokens (from the start of `text` up to the
// end of the last kept token).
std::string_view first_tokens(std::string_view text, std::size_t max_tokens);

// Lowercased word terms used for keyword indexing and keyword statistics:
// runs of word characters, with each CJK ideograph as its own term.
struct TermSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string term;  // ASCII-lowercased
};
std::vector<TermSpan> term_spans(std::string_view text);
std::vector<std::string> terms(std::string_view text);

// Small built-in English and Chinese stopword lists (see README).
bool is_stopword(std::string_view lowercased_term);

}  // namespace litpilot::corpus
