#include <doctest.h>

#include <string>
#include <string_view>

#include "gosu/tokenizer.hpp"

using namespace gosu;

namespace {

std::string token_at(std::string_view text, const TokenSpan& span) {
    return std::string(text.substr(span.begin, span.end - span.begin));
}

}  // namespace

TEST_CASE("word runs are single tokens, punctuation splits off") {
    const std::string text = "Ramipril 2.5 mg daily!";
    const auto spans = tokenize_spans(text);
    REQUIRE(spans.size() == 7);
    CHECK(token_at(text, spans[0]) == "Ramipril");
    CHECK(token_at(text, spans[1]) == "2");
    CHECK(token_at(text, spans[2]) == ".");
    CHECK(token_at(text, spans[3]) == "5");
    CHECK(token_at(text, spans[4]) == "mg");
    CHECK(token_at(text, spans[5]) == "daily");
    CHECK(token_at(text, spans[6]) == "!");
}

TEST_CASE("underscores glue into word tokens") {
    CHECK(count_tokens("snake_case_name") == 1);
    CHECK(count_tokens("a_b c_d") == 2);
}

TEST_CASE("whitespace never becomes a token") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("   \t\n  ") == 0);
    CHECK(count_tokens(" a  b\tc\nd ") == 4);
}

TEST_CASE("utf8 multibyte sequences stay glued to their word") {
    // "café" is one token: the 0xc3 0xa9 bytes count as word bytes.
    CHECK(count_tokens("caf\xc3\xa9") == 1);
    CHECK(count_tokens("caf\xc3\xa9 au lait") == 3);
}

TEST_CASE("spans are contiguous, ordered, and cover no whitespace") {
    const std::string text = "alpha, beta (gamma) 42";
    const auto spans = tokenize_spans(text);
    CHECK(count_tokens(text) == spans.size());
    std::size_t prev_end = 0;
    for (const auto& s : spans) {
        CHECK(s.begin >= prev_end);
        CHECK(s.begin < s.end);
        for (std::size_t i = s.begin; i < s.end; ++i) {
            CHECK(text[i] != ' ');
        }
        prev_end = s.end;
    }
}

TEST_CASE("punctuation runs split into single-byte tokens") {
    CHECK(count_tokens("...") == 3);
    CHECK(count_tokens("a--b") == 4);  // "a", "-", "-", "b"
}
