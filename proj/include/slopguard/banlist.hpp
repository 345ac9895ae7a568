#pragma once

// Compiled ban patterns and the scanner that finds their earliest occurrence
// in generated text.
//
// Three pattern kinds share one id space (an id indexes `entries`):
//
//   phrase  literal string, matched case-insensitively against the raw text.
//           A match additionally needs a word boundary on each side, unless
//           the phrase itself starts or ends with a non-word character on
//           that side.  So "cat" does not hit "cation", but "cat[" hits
//           "cat[morecat]".
//   ngram   2-3 content words, matched against the lowercased word stream
//           after dropping stopwords and words shorter than min_word_len.
//           The reported span runs from the first byte of the first content
//           word to the last byte of the last one.
//   regex   matched verbatim (case-sensitive) over the raw text.  All
//           sources are also compiled into one alternation, which the
//           scanner uses as a cheap presence gate before walking the
//           individual expressions.
//
// Whitelisted entries are removed at compile time by exact, lowercased
// string comparison (n-grams compare space-joined).
//
// scan() returns the earliest non-ignored match; ties prefer the longest
// match, then phrase < ngram < regex.

#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slopguard/aho_corasick.hpp"

namespace slopguard {

enum class pattern_kind { phrase = 0, ngram = 1, regex = 2 };

struct pattern_entry {
    pattern_kind kind;
    std::string display;             // e.g. "phrase:elara"
    std::string phrase;              // phrase entries, lowercased
    std::vector<std::string> ngram;  // ngram entries, lowercased words
    std::string regex_source;        // regex entries, verbatim
};

struct text_span {
    size_t begin = 0;  // byte offsets, end exclusive
    size_t end = 0;
    friend bool operator==(const text_span&, const text_span&) = default;
};

struct pattern_match {
    pattern_kind kind;
    int pattern_id = -1;
    text_span span;
};

struct violation {
    pattern_kind kind;
    int pattern_id = -1;
    text_span span;
    size_t start_token = 0;  // token whose decoded span contains span.begin
};

// (token index, pattern id) pairs exempted from future scans.
using ignore_set = std::set<std::pair<size_t, int>>;

struct banlist {
    std::vector<pattern_entry> entries;
    std::vector<std::string> whitelist;  // lowercased, kept for serialization
    size_t min_word_len = 3;
    bool ngram_remove_stopwords = true;

    // compiled state
    aho_corasick phrase_ac;
    std::vector<std::regex> regexes;          // parallel to regex entry ids
    std::vector<int> regex_ids;
    std::optional<std::regex> regex_gate;     // single alternation over all sources

    bool empty() const { return entries.empty(); }
};

// Validates and compiles.  Throws data_error naming the offending pattern on
// empty phrases, n-grams of the wrong arity, n-grams containing stopwords or
// short words, and regexes that fail to compile.
banlist compile_banlist(const std::vector<std::string>& phrases,
                        const std::vector<std::vector<std::string>>& ngrams,
                        const std::vector<std::string>& regex_sources,
                        const std::vector<std::string>& whitelist,
                        size_t min_word_len = 3,
                        bool ngram_remove_stopwords = true);

// Every match of every pattern, unfiltered.  Phrase and n-gram occurrences
// may overlap each other; each regex contributes its leftmost
// non-overlapping matches.
std::vector<pattern_match> collect_matches(const banlist& bl, std::string_view text);

// Maps a byte position to the token whose span contains it.
// Throws internal_error when pos lies outside every span.
size_t char_to_token(const std::vector<text_span>& token_spans, size_t pos);

std::optional<violation> scan(const banlist& bl, std::string_view text,
                              const std::vector<text_span>& token_spans,
                              const ignore_set& ignored);

// JSON file format: {"slop_phrases": [...], "ngrams": ["a b c", ...],
// "regex_patterns": [...], "whitelist": [...]}
banlist load_banlist_json(const std::string& path, size_t min_word_len = 3);
void save_banlist_json(const banlist& bl, const std::string& path);

// Recompiles with extra patterns appended; duplicates are dropped.
banlist extend_banlist(const banlist& bl,
                       const std::vector<std::string>& phrases,
                       const std::vector<std::vector<std::string>>& ngrams);

}  // namespace slopguard
