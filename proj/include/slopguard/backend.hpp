#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace slopguard {

struct sampling_params {
    double temperature = 1.0;
    double top_p = 1.0;
    int top_k = 50;      // 0 disables
    double min_p = 0.01; // 0 disables
};

struct chunk_request {
    std::string prompt;  // full context: original prompt plus generated text
    int max_tokens = 20;
    sampling_params sampling;
    int top_logprobs = 20;
    std::vector<std::string> stop_sequences;
    uint64_t seed = 0;
};

struct token_candidate {
    std::string text;
    std::optional<int> id;
    double logprob = 0.0;
};

struct chunk_token {
    std::string text;
    std::optional<int> id;
    std::vector<token_candidate> candidates;  // logprob descending, contains *this
};

enum class finish_reason { length, stop, eos };

struct chunk_response {
    std::vector<chunk_token> tokens;
    finish_reason finish = finish_reason::length;
    int attempts = 1;  // transport attempts spent on this call
};

class backend {
public:
    virtual ~backend() = default;
    // Must be safe to call from several generations at once.
    virtual chunk_response next_chunk(const chunk_request& req) = 0;
};

// Repairs an endpoint reply in place so downstream code can rely on:
// candidates sorted by logprob descending (ties by text), logprobs <= 0,
// and the emitted token present in its own candidate list.  Idempotent.
void normalize_response(chunk_response& resp);

}  // namespace slopguard
