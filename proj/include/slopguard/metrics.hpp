#pragma once

// Output-quality measurements: how often banned patterns still show up, and
// how lexically varied the text is.
//
// Suppression compares banned-match counts per 1000 bytes of text between a
// baseline corpus and a treated one.  Diversity is the mean of six
// length-controlled components (MATTR over sliding 500-word windows,
// Root-TTR, HD-D with 42-token draws, Distinct-1/2/3); scores are usually
// reported normalized so a chosen baseline corpus sits at 100.
//
// Words come from the same tokenizer as the profiler (lowercased \w runs,
// no length or stopword filtering here).  MATTR, Root-TTR and HD-D run
// over the concatenated corpus stream; Distinct-n slots never cross
// document boundaries.

#include <string>
#include <vector>

#include "slopguard/banlist.hpp"

namespace slopguard {

struct suppression_report {
    double baseline_per_1000 = 0.0;
    double treated_per_1000 = 0.0;
    double percent = 0.0;  // clamped to [0, 100]
    bool baseline_zero = false;
};

suppression_report suppression_rate(const std::vector<std::string>& baseline_corpus,
                                    const std::vector<std::string>& treated_corpus,
                                    const banlist& bl);

struct diversity_report {
    double mattr = 0.0;
    double root_ttr = 0.0;
    double hdd = 0.0;
    double distinct_1 = 0.0;
    double distinct_2 = 0.0;
    double distinct_3 = 0.0;
    double aggregate = 0.0;        // plain mean of the six
    bool mattr_full_text = false;  // text shorter than the window
    size_t total_words = 0;
};

diversity_report diversity(const std::vector<std::string>& corpus, size_t mattr_window = 500,
                           size_t hdd_draw = 42);

// mean over components of 100 * treated / baseline; components where the
// baseline is zero are skipped
double normalized_aggregate(const diversity_report& treated, const diversity_report& baseline);

std::string suppression_to_json(const suppression_report& r);
std::string diversity_to_json(const diversity_report& r);

// one row per document, header included
std::string diversity_csv(const std::vector<std::string>& corpus, size_t mattr_window = 500,
                          size_t hdd_draw = 42);

}  // namespace slopguard
