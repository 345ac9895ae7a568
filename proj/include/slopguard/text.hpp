#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace slopguard {

// Word characters follow the usual regex \w class: ASCII letters, digits,
// underscore.  Bytes above 0x7f are never word characters, which keeps all
// positions and spans plain byte offsets even in UTF-8 text.
inline bool is_word_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_';
}

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string to_lower(std::string_view s);

struct word_span {
    std::string text;   // lowercased
    size_t begin = 0;   // byte offsets into the source text, end exclusive
    size_t end = 0;
};

// Maximal runs of word characters, lowercased, with their source spans.
std::vector<word_span> split_words(std::string_view text);

const std::unordered_set<std::string>& english_stopwords();
bool is_stopword(const std::string& lowercased);

// Stream used for n-gram matching and profiling: drops words shorter than
// min_word_len and, when asked, stopwords.
std::vector<word_span> content_words(std::string_view text, size_t min_word_len,
                                     bool remove_stopwords);

}  // namespace slopguard
