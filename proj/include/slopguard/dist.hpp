#pragma once

// Discrete next-token distributions and the filters applied to them.
// Probabilities are plain doubles; lists are kept sorted by probability
// descending with ties broken by token text so every operation is
// deterministic.

#include <optional>
#include <string>
#include <vector>

namespace slopguard {

struct weighted_token {
    std::string text;
    std::optional<int> id;
    double prob = 0.0;
};

void sort_desc(std::vector<weighted_token>& dist);

// Scales to sum 1.  Throws internal_error when the total mass is not > 0.
void renormalize(std::vector<weighted_token>& dist);

// Drops entries with prob < min_p * max(prob).  No-op when min_p <= 0.
void apply_min_p(std::vector<weighted_token>& dist, double min_p);

// Reshapes p -> p^(1/t) and renormalizes.  t == 1 is the identity;
// t must be > 0.
void apply_temperature(std::vector<weighted_token>& dist, double t);

// Keeps the k most probable entries.  No-op when k <= 0.
void apply_top_k(std::vector<weighted_token>& dist, int k);

// Keeps the smallest prefix of the sorted list with cumulative mass >= p.
// No-op when p >= 1.
void apply_top_p(std::vector<weighted_token>& dist, double p);

// Inverse-CDF draw; u in [0, 1).  dist must be normalized and non-empty.
const weighted_token& draw(const std::vector<weighted_token>& dist, double u);

}  // namespace slopguard
