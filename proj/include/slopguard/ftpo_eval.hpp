#pragma once

// Dataset-level evaluation of the preference loss.  A logit provider maps a
// sample to (y, y_ref) plus a token-text index so the math module never
// needs a tokenizer or a model; desk runs use the seeded mock provider.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slopguard/ftpo_data.hpp"
#include "slopguard/ftpo_loss.hpp"

namespace slopguard {

struct provided_logits {
    std::vector<double> y;
    std::vector<double> y_ref;
    std::map<std::string, int> token_index;
};

using logit_provider = std::function<std::optional<provided_logits>(const ftpo_sample&)>;

struct batch_report {
    double mean_loss = 0.0;
    double mean_pref = 0.0;
    double mean_target = 0.0;
    double mean_nontarget = 0.0;
    double pref_accuracy = 0.0;  // fraction with max chosen logit above rejected
    double delta_chosen = 0.0;   // signed mean deviation from reference per class
    double delta_rejected = 0.0;
    double delta_other = 0.0;
    size_t evaluated = 0;
    size_t skipped = 0;
};

// threads <= 0 picks a count from the hardware; results do not depend on it
batch_report batch_eval(const std::vector<ftpo_sample>& samples, const logit_provider& provider,
                        const ftpo_params& params, int threads = 0);

// deterministic synthetic logits keyed on sample content, vocab_pad filler
// tokens beyond the sample's own
logit_provider make_mock_logit_provider(uint64_t seed, int vocab_pad = 12);

std::string report_to_json(const batch_report& r);

}  // namespace slopguard
