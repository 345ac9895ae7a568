#include "slopguard/backend.hpp"

#include <algorithm>

namespace slopguard {

void normalize_response(chunk_response& resp) {
    for (chunk_token& tok : resp.tokens) {
        double worst = 0.0;
        bool present = false;
        for (token_candidate& c : tok.candidates) {
            if (c.logprob > 0.0) c.logprob = 0.0;
            worst = std::min(worst, c.logprob);
            present |= c.text == tok.text;
        }
        if (!present) {
            // endpoints occasionally sample outside their reported top list
            tok.candidates.push_back({tok.text, tok.id, worst});
        }
        std::stable_sort(tok.candidates.begin(), tok.candidates.end(),
                         [](const token_candidate& a, const token_candidate& b) {
                             if (a.logprob != b.logprob) return a.logprob > b.logprob;
                             return a.text < b.text;
                         });
    }
}

}  // namespace slopguard
