#pragma once

// Over-representation forensics.
//
// A generated corpus is tokenized with the same rules the pattern engine
// uses (lowercase, [A-Za-z0-9_] word characters, words under min_word_len
// dropped, stopwords dropped for n-gram streams).  Frequencies are counted
// per million units of the same kind: words per million words, bigrams per
// million bigram slots, trigrams likewise.  Against a human baseline table
// each pattern is either "dict" (present in the baseline, scored by the
// ratio f_llm / f_human) or "nodict" (absent from the baseline entirely,
// scored by f_llm alone).  Nodict patterns order ahead of dict ones in
// every merged ranking: absence from human text is treated as stronger
// evidence than any finite ratio.
//
// A model's fingerprint is its top 120 words plus top 40 bigrams and top 40
// trigrams under that ranking, n-grams only when they occur in at least
// min_ngram_prompts distinct prompts.  Fingerprint distance is the mean
// over the union of patterns (per kind) of the absolute rank difference,
// where a pattern missing from one list counts as rank list_size + 1.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slopguard/banlist.hpp"

namespace slopguard {

enum class gram_kind { word = 0, bigram = 1, trigram = 2 };

const char* gram_kind_name(gram_kind k);
size_t gram_arity(gram_kind k);

struct corpus_doc {
    std::string prompt_id;
    std::string text;
};

struct freq_entry {
    uint64_t count = 0;
    std::set<std::string> prompts;  // distinct prompt ids the pattern appeared in
};

struct freq_table {
    gram_kind kind = gram_kind::word;
    int min_word_len = 3;
    bool stopwords_removed = false;
    std::map<std::string, freq_entry> entries;  // n-grams stored space-joined
    uint64_t total = 0;                         // counting units of this kind

    double per_million(const std::string& pattern) const;
};

freq_table count_patterns(const std::vector<corpus_doc>& corpus, gram_kind kind,
                          int min_word_len, bool remove_stopwords);

// commutative; tables must agree on kind and tokenizer settings
freq_table merge_tables(const freq_table& a, const freq_table& b);

struct baseline_table {
    gram_kind kind = gram_kind::word;
    std::map<std::string, double> per_million;
};

// TSV lines: pattern<TAB>per-million, '#' comments allowed
baseline_table load_baseline_tsv(const std::string& path, gram_kind kind);

struct profile_entry {
    std::string pattern;
    gram_kind kind = gram_kind::word;
    double f_llm = 0.0;  // per million
    std::optional<double> f_human;
    std::optional<double> ratio;  // present exactly for dict entries
    bool dict = false;
    uint64_t count = 0;  // raw occurrences
    int n_prompts = 0;
};

// one ranked list: nodict block (f_llm descending) then dict block (ratio
// descending), lexicographic tie-break inside each block
std::vector<profile_entry> compute_ratios(const freq_table& llm, const baseline_table& human);

struct slop_fingerprint {
    std::vector<std::string> words;
    std::vector<std::string> bigrams;
    std::vector<std::string> trigrams;
};

struct fingerprint_sizes {
    size_t words = 120;
    size_t bigrams = 40;
    size_t trigrams = 40;
};

struct slop_profile {
    std::vector<profile_entry> words;
    std::vector<profile_entry> bigrams;
    std::vector<profile_entry> trigrams;
    slop_fingerprint fingerprint;
};

slop_profile build_profile(const freq_table& words, const freq_table& bigrams,
                           const freq_table& trigrams, const baseline_table& word_baseline,
                           const baseline_table& ngram_baseline,
                           const fingerprint_sizes& sizes = {}, int min_ngram_prompts = 3);

struct banlist_quotas {
    int dict_words = 920;
    int nodict_words = 80;
    int dict_bigrams = 300;
    int nodict_bigrams = 200;
    int dict_trigrams = 300;
    int nodict_trigrams = 200;
};

struct banlist_additions {
    std::vector<std::string> words;
    std::vector<std::vector<std::string>> ngrams;
};

// top-N per class and kind, skipping whitelisted patterns, patterns already
// banned, raw count < min_count, and n-grams below the prompt-spread gate;
// skipped slots are backfilled from further down the ranking
banlist_additions build_banlist(const slop_profile& profile, const banlist_quotas& quotas,
                                const std::vector<std::string>& whitelist,
                                const banlist& already = banlist{},
                                uint64_t min_count = 2, int min_ngram_prompts = 3);

double fingerprint_distance(const slop_fingerprint& a, const slop_fingerprint& b);

// square matrix in input order with a header row/column of names
std::string distance_matrix_csv(const std::vector<std::string>& names,
                                const std::vector<slop_fingerprint>& fingerprints);

std::vector<corpus_doc> load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const std::vector<corpus_doc>& corpus, const std::string& path);

std::string profile_to_json(const slop_profile& profile);

}  // namespace slopguard
