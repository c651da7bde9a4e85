#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace clifs::text {

struct Token {
    std::size_t begin = 0;  // byte offsets into the source text
    std::size_t end = 0;
    std::string lower;      // ASCII-lowercased surface form
    bool is_word = true;    // false for punctuation pieces
};

enum class Apostrophes {
    split,  // "country's" -> country, s (embedding-table convention)
    keep,   // "don't" stays one word (dictionary convention)
};

// Runs of ASCII letters/digits (and, under Apostrophes::keep, apostrophes
// flanked by letters). Bytes >= 0x80 are treated as letters so UTF-8 words
// stay intact.
std::vector<Token> words(std::string_view text, Apostrophes mode = Apostrophes::split);

// Words plus one-character punctuation pieces, in text order. Whitespace is
// dropped. This is the sequence fed to masked-LM runtimes.
std::vector<Token> pieces(std::string_view text);

// Whitespace-delimited token count; punctuation is not split off.
std::size_t whitespace_word_count(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

}  // namespace clifs::text
