#pragma once

// Training-pair capture and dataset handling.
//
// Every backtrack that actually swapped a token yields one candidate
// sample: the prompt plus the decoded text up to the violation, the
// rejected token, and the min-p survivors as chosen alternatives.  A
// survivor is dropped when appending it to the prefix would itself start a
// banned match inside the survivor's own span.  Let-throughs never become
// samples and anything with fewer than min_chosen_tokens alternatives is
// skipped.
//
// regularize_dataset thins skew instead of rebalancing by duplication:
// samples grouped by rejected text are kept with probability
// (n_min/n)^rejected_strength, and samples whose chosen sets sit on
// globally common tokens are kept with probability
// (mean_rank/max_mean_rank)^chosen_strength.  Strength 0 is a no-op at both
// knobs, 1 pushes expected group sizes to uniform.  Draws come from one
// seeded stream, two per sample in input order, so results are reproducible
// and a sample's fate does not depend on what happened to its neighbors.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slopguard/banlist.hpp"
#include "slopguard/sampler.hpp"

namespace slopguard {

struct ftpo_source {
    std::string pattern;  // display form of the violated pattern
    std::string generation_id;
    size_t position = 0;
};

struct ftpo_sample {
    std::string prompt_text;
    gen_token rejected;
    std::vector<gen_token> chosen;
    ftpo_source source;

    bool operator==(const ftpo_sample& other) const;
};

std::optional<ftpo_sample> capture_sample(const backtrack_event& ev, const std::string& prompt,
                                          const banlist& bl,
                                          const std::string& generation_id,
                                          int min_chosen_tokens = 4);

std::vector<ftpo_sample> regularize_dataset(const std::vector<ftpo_sample>& samples,
                                            double rejected_strength, double chosen_strength,
                                            uint64_t seed);

void write_dataset(const std::vector<ftpo_sample>& samples, const std::string& path);
std::vector<ftpo_sample> read_dataset(const std::string& path);

std::string sample_to_jsonl(const ftpo_sample& s);
ftpo_sample sample_from_jsonl(const std::string& line);  // throws data_error on bad input

}  // namespace slopguard
