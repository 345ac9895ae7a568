#include "slopguard/text.hpp"

namespace slopguard {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = ascii_lower(c);
    return out;
}

std::vector<word_span> split_words(std::string_view text) {
    std::vector<word_span> out;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        if (!is_word_char(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        size_t j = i + 1;
        while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
        word_span w;
        w.begin = i;
        w.end = j;
        w.text.reserve(j - i);
        for (size_t k = i; k < j; ++k) w.text.push_back(ascii_lower(text[k]));
        out.push_back(std::move(w));
        i = j;
    }
    return out;
}

const std::unordered_set<std::string>& english_stopwords() {
    static const std::unordered_set<std::string> words = {
#include "stopwords_en.inc"
    };
    return words;
}

bool is_stopword(const std::string& lowercased) {
    return english_stopwords().count(lowercased) > 0;
}

std::vector<word_span> content_words(std::string_view text, size_t min_word_len,
                                     bool remove_stopwords) {
    std::vector<word_span> out = split_words(text);
    std::erase_if(out, [&](const word_span& w) {
        if (w.text.size() < min_word_len) return true;
        return remove_stopwords && is_stopword(w.text);
    });
    return out;
}

}  // namespace slopguard
