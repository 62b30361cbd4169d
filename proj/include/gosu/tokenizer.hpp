#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace gosu {

// Half-open byte range [begin, end) of one token inside its source text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Whitespace-and-punctuation tokenizer used everywhere a token count or token
// boundary is needed (chunking, usage accounting, context budgeting).
//
// Rules:
//   - whitespace separates tokens and is never part of one;
//   - a maximal run of word bytes (ASCII alphanumerics, '_', or any byte
//     >= 0x80, so UTF-8 sequences stay glued together) is one token;
//   - every other byte (punctuation) is a single-byte token.
//
// Deterministic, locale-independent, total.
std::vector<TokenSpan> tokenize_spans(std::string_view text);

// Number of tokens in `text`; equal to tokenize_spans(text).size().
std::size_t count_tokens(std::string_view text);

}  // namespace gosu
