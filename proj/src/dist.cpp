#include "slopguard/dist.hpp"

#include <algorithm>
#include <cmath>

#include "slopguard/errors.hpp"

namespace slopguard {

void sort_desc(std::vector<weighted_token>& dist) {
    std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) {
        if (a.prob != b.prob) return a.prob > b.prob;
        return a.text < b.text;
    });
}

void renormalize(std::vector<weighted_token>& dist) {
    double total = 0.0;
    for (const auto& t : dist) total += t.prob;
    if (!(total > 0.0))
        throw internal_error("distribution has no probability mass to renormalize");
    for (auto& t : dist) t.prob /= total;
}

void apply_min_p(std::vector<weighted_token>& dist, double min_p) {
    if (min_p <= 0.0 || dist.empty()) return;
    double max_prob = 0.0;
    for (const auto& t : dist) max_prob = std::max(max_prob, t.prob);
    const double cutoff = min_p * max_prob;
    std::erase_if(dist, [&](const weighted_token& t) { return t.prob < cutoff; });
}

void apply_temperature(std::vector<weighted_token>& dist, double t) {
    if (t == 1.0 || dist.empty()) return;
    if (!(t > 0.0)) throw internal_error("temperature must be > 0");
    for (auto& w : dist) w.prob = std::pow(w.prob, 1.0 / t);
    renormalize(dist);
}

void apply_top_k(std::vector<weighted_token>& dist, int k) {
    if (k <= 0 || static_cast<size_t>(k) >= dist.size()) return;
    sort_desc(dist);
    dist.resize(static_cast<size_t>(k));
}

void apply_top_p(std::vector<weighted_token>& dist, double p) {
    if (p >= 1.0 || dist.empty()) return;
    sort_desc(dist);
    double cum = 0.0;
    size_t keep = dist.size();
    for (size_t i = 0; i < dist.size(); ++i) {
        cum += dist[i].prob;
        if (cum >= p) {
            keep = i + 1;
            break;
        }
    }
    dist.resize(keep);
}

const weighted_token& draw(const std::vector<weighted_token>& dist, double u) {
    if (dist.empty()) throw internal_error("draw from empty distribution");
    double cum = 0.0;
    for (const auto& t : dist) {
        cum += t.prob;
        if (u < cum) return t;
    }
    return dist.back();
}

}  // namespace slopguard
