#include "slopguard/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/rng.hpp"

namespace slopguard {

void token_trace::append(gen_token tok, std::vector<token_candidate> cands) {
    if (tok.text.empty()) {
        throw internal_error("trace: cannot append an empty token");
    }
    size_t begin = text.size();
    text += tok.text;
    spans.push_back({begin, text.size()});
    tokens.push_back(std::move(tok));
    candidates.push_back(std::move(cands));
}

void token_trace::truncate_to(size_t pos) {
    if (pos > tokens.size()) {
        throw internal_error("trace: truncate past end");
    }
    if (pos == tokens.size()) return;
    text.resize(spans[pos].begin);
    tokens.resize(pos);
    spans.resize(pos);
    candidates.resize(pos);
    // marks and rejection counts at pos stay: the position is about to be
    // refilled and its history must keep compounding
    std::erase_if(ignored, [pos](const std::pair<size_t, int>& m) { return m.first > pos; });
    for (auto it = rejected_counts.begin(); it != rejected_counts.end();) {
        if (it->first > pos) {
            it = rejected_counts.erase(it);
        } else {
            ++it;
        }
    }
}

double attenuate(double prob, double strength) {
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw config_error("ban_strength must lie in [0, 1]");
    }
    return prob * std::pow(10.0, -10.0 * strength);
}

namespace {

struct stage_output {
    std::vector<weighted_token> dist;
    std::vector<weighted_token> survivors;
};

stage_output run_stage(std::vector<weighted_token> d, const std::string& banned,
                       double strength, const sampling_params& sp) {
    for (auto& t : d) {
        if (t.text == banned) t.prob = attenuate(t.prob, strength);
    }
    renormalize(d);
    apply_min_p(d, sp.min_p);
    stage_output out;
    out.survivors = d;
    apply_temperature(d, sp.temperature);
    apply_top_k(d, sp.top_k);
    apply_top_p(d, sp.top_p);
    renormalize(d);
    out.dist = std::move(d);
    return out;
}

}  // namespace

resample_result resample_distribution(std::vector<weighted_token> candidates,
                                      const std::string& banned_text,
                                      double ban_strength, const sampling_params& sp,
                                      bool force_backtrack) {
    if (candidates.empty()) {
        throw internal_error("resample: no cached candidates at position");
    }

    // relaxation ladder; stage 0 is the configured pipeline
    sampling_params stages[5];
    stages[0] = sp;
    stages[1] = stages[0];
    stages[1].temperature = 1.0;
    stages[2] = stages[1];
    stages[2].min_p = 0.0;
    stages[3] = stages[2];
    stages[3].top_p = 1.0;
    stages[4] = stages[3];
    stages[4].top_k = 0;

    resample_result res;
    for (int stage = 0; stage < 5; ++stage) {
        stage_output out = run_stage(candidates, banned_text, ban_strength, stages[stage]);
        res.survivors = out.survivors;
        res.ladder_stage = stage;
        if (!force_backtrack) {
            res.dist = std::move(out.dist);
            return res;
        }
        bool has_other = false;
        for (const auto& t : out.dist) {
            if (t.text != banned_text) {
                has_other = true;
                break;
            }
        }
        if (has_other) {
            std::erase_if(out.dist,
                          [&](const weighted_token& t) { return t.text == banned_text; });
            renormalize(out.dist);
            res.dist = std::move(out.dist);
            return res;
        }
    }

    // every stage collapsed onto the banned token, give up and pass it
    weighted_token only;
    only.text = banned_text;
    only.prob = 1.0;
    for (const auto& c : candidates) {
        if (c.text == banned_text) {
            only.id = c.id;
            break;
        }
    }
    res.dist = {only};
    return res;
}

std::optional<violation> detect_after_chunk(const token_trace& trace, const banlist& bl) {
    return scan(bl, trace.text, trace.spans, trace.ignored);
}

namespace {

std::vector<token_candidate> take_candidates(const chunk_token& tok) {
    return tok.candidates;
}

// candidate probabilities at a position with all past rejections applied;
// the final factor for the rejection being handled right now is left to
// resample_distribution
std::vector<weighted_token> attenuated_candidates(const token_trace& trace, size_t pos,
                                                  const std::string& rejected_text,
                                                  double strength) {
    std::vector<weighted_token> out;
    const std::map<std::string, int>* counts = nullptr;
    auto it = trace.rejected_counts.find(pos);
    if (it != trace.rejected_counts.end()) counts = &it->second;

    for (const auto& c : trace.candidates[pos]) {
        weighted_token w;
        w.text = c.text;
        w.id = c.id;
        w.prob = std::exp(c.logprob);
        int n = 0;
        if (counts) {
            auto jt = counts->find(c.text);
            if (jt != counts->end()) n = jt->second;
        }
        if (c.text == rejected_text) n -= 1;  // that application happens in the resample
        for (int k = 0; k < n; ++k) w.prob = attenuate(w.prob, strength);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<gen_token> chosen_from_survivors(const std::vector<weighted_token>& survivors,
                                             const std::string& rejected_text) {
    std::vector<gen_token> out;
    for (const auto& s : survivors) {
        if (s.text == rejected_text) continue;
        out.push_back({s.text, s.id});
    }
    return out;
}

// resolves every violation visible in the current trace; returns true when
// at least one rewind happened (the caller must then regenerate the tail
// before trusting any finish reason from the backend)
bool resolve_violations(token_trace& trace, const banlist& bl, const sampler_config& cfg,
                        std::mt19937_64& rng, std::vector<backtrack_event>& events,
                        generation_stats& stats) {
    bool rewound = false;
    while (true) {
        std::optional<violation> v = scan(bl, trace.text, trace.spans, trace.ignored);
        if (!v.has_value()) return rewound;

        size_t pos = v->start_token;
        if (pos >= trace.size()) {
            throw internal_error("scan produced a violation outside the trace");
        }
        const gen_token rejected = trace.tokens[pos];

        backtrack_event ev;
        ev.position = pos;
        ev.rejected = rejected;
        ev.pattern_id = v->pattern_id;
        ev.pattern = bl.entries[static_cast<size_t>(v->pattern_id)].display;
        ev.generated_prefix = trace.text.substr(0, trace.spans[pos].begin);

        if (cfg.ban_strength == 0.0 && !cfg.force_backtrack) {
            // transparent mode: log the event, exempt the occurrence, touch nothing
            auto cands = attenuated_candidates(trace, pos, rejected.text, 0.0);
            resample_result rr =
                resample_distribution(std::move(cands), rejected.text, 0.0, cfg.sampling, false);
            ev.chosen = chosen_from_survivors(rr.survivors, rejected.text);
            ev.resampled = rejected;
            ev.let_through = true;
            trace.ignored.insert({pos, v->pattern_id});
            stats.backtracks += 1;
            stats.lets_through += 1;
            events.push_back(std::move(ev));
            continue;
        }

        stats.backtracks += 1;
        auto& counts = trace.rejected_counts[pos];
        counts[rejected.text] += 1;

        auto cands = attenuated_candidates(trace, pos, rejected.text, cfg.ban_strength);
        resample_result rr = resample_distribution(std::move(cands), rejected.text,
                                                   cfg.ban_strength, cfg.sampling,
                                                   cfg.force_backtrack);
        ev.chosen = chosen_from_survivors(rr.survivors, rejected.text);

        const weighted_token& picked = draw(rr.dist, next_uniform(rng));
        ev.resampled = {picked.text, picked.id};

        // drawing a token already rejected here means attenuation cannot win
        // at this position; accept it and exempt the occurrence
        bool let_through = counts.find(picked.text) != counts.end();
        ev.let_through = let_through;

        stats.tokens_discarded += static_cast<int64_t>(trace.size() - pos);
        std::vector<token_candidate> cached = trace.candidates[pos];
        trace.truncate_to(pos);
        trace.append({picked.text, picked.id}, std::move(cached));
        if (let_through) {
            trace.ignored.insert({pos, v->pattern_id});
            stats.lets_through += 1;
        }
        rewound = true;
        events.push_back(std::move(ev));
    }
}

}  // namespace

generation_result generate(backend& be, const std::string& prompt, const banlist& bl,
                           const sampler_config& cfg, uint64_t seed) {
    if (!(cfg.ban_strength >= 0.0 && cfg.ban_strength <= 1.0)) {
        throw config_error("ban_strength must lie in [0, 1]");
    }
    if (cfg.chunk_size <= 0) throw config_error("chunk_size must be positive");
    if (cfg.max_new_tokens <= 0) throw config_error("max_new_tokens must be positive");

    auto t0 = std::chrono::steady_clock::now();
    generation_result res;
    std::mt19937_64 resample_rng(derive_seed(seed, stream_resample));
    uint64_t backend_seed = derive_seed(seed, stream_backend);

    bool done = false;
    while (!done && static_cast<int>(res.trace.size()) < cfg.max_new_tokens) {
        chunk_request req;
        req.prompt = prompt + res.trace.text;
        req.max_tokens = std::min(cfg.chunk_size,
                                  cfg.max_new_tokens - static_cast<int>(res.trace.size()));
        req.sampling = cfg.sampling;
        req.top_logprobs = cfg.top_logprobs;
        req.stop_sequences = cfg.stop_sequences;
        req.seed = backend_seed;

        chunk_response resp = be.next_chunk(req);
        res.stats.backend_calls += 1;
        if (resp.tokens.empty() && resp.finish == finish_reason::length) {
            throw backend_reply_error("backend returned an empty chunk without a stop");
        }
        for (const auto& tok : resp.tokens) {
            res.trace.append({tok.text, tok.id}, take_candidates(tok));
        }

        bool rewound =
            resolve_violations(res.trace, bl, cfg, resample_rng, res.events, res.stats);

        if (rewound) {
            // the backend's finish reason described a tail that no longer
            // exists, keep generating
            continue;
        }

        // chunking can split a stop string across requests, so re-check here
        size_t cut = std::string::npos;
        for (const auto& stop : cfg.stop_sequences) {
            if (stop.empty()) continue;
            size_t at = res.trace.text.find(stop);
            if (at != std::string::npos && at < cut) cut = at;
        }
        if (cut != std::string::npos) {
            size_t keep = 0;
            while (keep < res.trace.size() && res.trace.spans[keep].end <= cut) ++keep;
            res.trace.truncate_to(keep);
            res.finish = finish_reason::stop;
            done = true;
        } else if (resp.finish != finish_reason::length) {
            res.finish = resp.finish;
            done = true;
        }
    }

    if (!done) res.finish = finish_reason::length;
    res.text = res.trace.text;
    res.stats.tokens_kept = static_cast<int64_t>(res.trace.size());
    auto t1 = std::chrono::steady_clock::now();
    res.stats.elapsed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return res;
}

std::string event_to_jsonl(const backtrack_event& ev) {
    nlohmann::ordered_json j;
    j["position"] = ev.position;
    if (ev.rejected.id.has_value()) {
        j["rejected_token_id"] = *ev.rejected.id;
    } else {
        j["rejected_token_id"] = nullptr;
    }
    j["rejected_text"] = ev.rejected.text;
    nlohmann::ordered_json ids = nlohmann::ordered_json::array();
    nlohmann::ordered_json texts = nlohmann::ordered_json::array();
    for (const auto& c : ev.chosen) {
        if (c.id.has_value()) {
            ids.push_back(*c.id);
        } else {
            ids.push_back(nullptr);
        }
        texts.push_back(c.text);
    }
    j["chosen_token_ids"] = std::move(ids);
    j["chosen_texts"] = std::move(texts);
    if (ev.resampled.id.has_value()) {
        j["resampled_token_id"] = *ev.resampled.id;
    } else {
        j["resampled_token_id"] = nullptr;
    }
    j["pattern"] = ev.pattern;
    j["let_through"] = ev.let_through;
    return j.dump();
}

std::string stats_to_json(const generation_stats& st) {
    nlohmann::ordered_json j;
    j["tokens_kept"] = st.tokens_kept;
    j["tokens_discarded"] = st.tokens_discarded;
    j["backtracks"] = st.backtracks;
    j["lets_through"] = st.lets_through;
    j["elapsed_ms"] = st.elapsed_ms;
    return j.dump();
}

}  // namespace slopguard
