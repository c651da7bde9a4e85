#include "clifs/text.hpp"

#include <cctype>

namespace clifs::text {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_alpha(unsigned char c) { return std::isalpha(c) || c >= 0x80; }

}  // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::size_t whitespace_word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        bool space = is_space(static_cast<unsigned char>(c));
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::vector<Token> words(std::string_view s, Apostrophes mode) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_word_byte(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < s.size()) {
            auto c = static_cast<unsigned char>(s[i]);
            if (is_word_byte(c)) {
                ++i;
            } else if (mode == Apostrophes::keep && c == '\'' && i + 1 < s.size() &&
                       is_alpha(static_cast<unsigned char>(s[i + 1])) && i > start &&
                       is_alpha(static_cast<unsigned char>(s[i - 1]))) {
                ++i;
            } else {
                break;
            }
        }
        out.push_back(Token{start, i, to_lower(s.substr(start, i - start)), true});
    }
    return out;
}

std::vector<Token> pieces(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        if (is_space(c)) {
            ++i;
        } else if (is_word_byte(c)) {
            std::size_t start = i;
            while (i < s.size() && is_word_byte(static_cast<unsigned char>(s[i]))) ++i;
            out.push_back(Token{start, i, to_lower(s.substr(start, i - start)), true});
        } else {
            out.push_back(Token{i, i + 1, std::string(1, s[i]), false});
            ++i;
        }
    }
    return out;
}

}  // namespace clifs::text
