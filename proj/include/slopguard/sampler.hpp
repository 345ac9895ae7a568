#pragma once

// Backtracking generation loop.
//
// Tokens are requested from a backend in chunks.  After each chunk the
// decoded text (generated tokens only, never the prompt) is scanned against
// the banlist.  On a match the trace rewinds to the token whose span holds
// the first matching byte, that token's probability is knocked down by
// 10^(-10 * ban_strength) using the cached candidate list for the position,
// the usual filters (min-p, temperature, top-k, top-p) re-run, and a
// replacement is drawn.  No backend round trip happens for the resample
// itself; the discarded tail is simply regenerated on the next chunk
// request.
//
// Soft bans can fail: when the filtered distribution holds nothing but the
// banned token, or the draw lands on a token already rejected at this
// position, the token is let through and the (position, pattern) pair is
// ignore-marked so the same occurrence cannot trigger again.  With
// force_backtrack the filters are instead relaxed step by step (temperature,
// then min-p, then top-p, then top-k) until some other candidate survives;
// only when every stage fails does the banned token pass.
//
// ban_strength 0 without force_backtrack short-circuits: violations are
// recorded and ignore-marked but nothing is rewound or redrawn, so output
// is byte-identical to unconstrained sampling under the same seed.
//
// Randomness: resampling draws come from a dedicated stream
// derive_seed(seed, stream_resample); backend requests carry
// derive_seed(seed, stream_backend).  Repeated rejections at one position
// compound multiplicatively and survive rewinds to that same position.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slopguard/backend.hpp"
#include "slopguard/banlist.hpp"
#include "slopguard/dist.hpp"

namespace slopguard {

struct gen_token {
    std::string text;
    std::optional<int> id;
};

struct token_trace {
    std::vector<gen_token> tokens;
    std::vector<text_span> spans;                          // into text
    std::vector<std::vector<token_candidate>> candidates;  // cached per position
    std::string text;                                      // decoded generated text
    ignore_set ignored;
    // position -> token text -> rejection count; kept when rewinding to the
    // same position so repeated attenuation compounds
    std::map<size_t, std::map<std::string, int>> rejected_counts;

    size_t size() const { return tokens.size(); }
    void append(gen_token tok, std::vector<token_candidate> cands);
    void truncate_to(size_t pos);  // keep [0, pos); state at pos itself survives
};

struct sampler_config {
    sampling_params sampling;
    double ban_strength = 1.0;  // 0 disables suppression, 1 acts as a hard ban
    bool force_backtrack = false;
    int chunk_size = 20;
    int max_new_tokens = 1000;
    int top_logprobs = 20;
    std::vector<std::string> stop_sequences;
};

struct backtrack_event {
    size_t position = 0;
    gen_token rejected;
    std::vector<gen_token> chosen;  // min-p survivors at the position, minus rejected
    gen_token resampled;
    int pattern_id = -1;
    std::string pattern;  // display form
    bool let_through = false;
    std::string generated_prefix;  // decoded tokens before position, at event time
};

struct generation_stats {
    int64_t tokens_kept = 0;
    int64_t tokens_discarded = 0;
    int64_t backtracks = 0;
    int64_t lets_through = 0;
    int64_t backend_calls = 0;
    double elapsed_ms = 0.0;
};

struct generation_result {
    std::string text;
    token_trace trace;
    std::vector<backtrack_event> events;
    generation_stats stats;
    finish_reason finish = finish_reason::length;
};

// p_new = p * 10^(-10 * strength).  Throws config_error outside [0, 1].
double attenuate(double prob, double strength);

struct resample_result {
    std::vector<weighted_token> dist;       // final distribution, sums to 1
    std::vector<weighted_token> survivors;  // after the min-p stage of the stage used
    int ladder_stage = 0;                   // 0 normal; 1..4 force relaxation steps
};

// Pure distribution transform for one backtrack: attenuate the banned token,
// renormalize, min-p filter, then temperature / top-k / top-p, renormalize.
// Candidates carry probabilities; historical attenuation is expected to be
// pre-applied by the caller, this function applies exactly one step.
resample_result resample_distribution(std::vector<weighted_token> candidates,
                                      const std::string& banned_text,
                                      double ban_strength, const sampling_params& sp,
                                      bool force_backtrack);

// Scans the decoded trace against the banlist, honoring ignore marks.
std::optional<violation> detect_after_chunk(const token_trace& trace, const banlist& bl);

generation_result generate(backend& be, const std::string& prompt, const banlist& bl,
                           const sampler_config& cfg, uint64_t seed);

// JSONL record for one event; ids serialize as null when unknown.
std::string event_to_jsonl(const backtrack_event& ev);
std::string stats_to_json(const generation_stats& st);

}  // namespace slopguard
