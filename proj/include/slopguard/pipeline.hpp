#pragma once

// Stage drivers behind the CLI.  A run lives in one directory (timestamped
// under experiment_base_dir unless overridden):
//
//   manifest.json            reproduction bookkeeping
//   iter_<n>/corpus.jsonl    generated texts for iteration n
//   iter_<n>/events.jsonl    backtrack events, pinned record shape
//   iter_<n>/events_index.json  prompt_id -> {first_line, count}
//   iter_<n>/stats.json      totals and per-prompt sampler stats
//   iter_<n>/captures.jsonl  raw training pairs before regularization
//   iter_<n>/profile.json    over-representation analysis of the corpus
//   iter_<n>/banlist.json    full banlist after this iteration's additions
//   distance_matrix.csv      fingerprint distances across iterations
//   final_banlist.json
//   ftpo/dataset.jsonl       regularized training pairs
//   ftpo/report.json         batch evaluation under the mock logit provider
//   eval/report.json         suppression and diversity, iter 0 vs last
//   eval/diversity_<which>.csv
//
// Iteration 0 generates with an empty banlist to give the profiler a clean
// baseline; iteration 1 applies the first computed banlist plus user
// extras; later iterations extend it under the *_subsequent quotas.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slopguard/banlist.hpp"
#include "slopguard/config.hpp"
#include "slopguard/ftpo_data.hpp"
#include "slopguard/metrics.hpp"
#include "slopguard/profiler.hpp"
#include "slopguard/sampler.hpp"

namespace slopguard {

struct prompt_item {
    std::string prompt_id;
    std::string prompt;
};

// JSONL {prompt_id, prompt} ("text" accepted for the prompt field)
std::vector<prompt_item> load_prompts_jsonl(const std::string& path);

std::string apply_prompt_template(const std::string& tmpl, const std::string& prompt);

std::string make_run_dir(const std::string& base_dir);
void ensure_dir(const std::string& path);

// user-supplied bans and whitelist from the config, nothing computed
banlist config_banlist(const app_config& cfg);

struct profile_outcome {
    slop_profile profile;
    banlist merged;  // previous banlist plus this round's additions
    size_t added_words = 0;
    size_t added_ngrams = 0;
};

profile_outcome profile_stage(const app_config& cfg, const std::vector<corpus_doc>& corpus,
                              const banlist& already, bool initial_quotas,
                              const std::string& out_dir);

struct generation_artifacts {
    std::vector<corpus_doc> corpus;        // prompt order
    std::vector<ftpo_sample> captures;     // prompt order, event order within
    generation_stats totals;
    size_t total_events = 0;
    size_t prompts_failed = 0;
};

generation_artifacts generate_stage(const app_config& cfg, const banlist& bl,
                                    const std::vector<prompt_item>& prompts,
                                    const std::string& out_dir);

struct ftpo_outcome {
    size_t raw_samples = 0;
    size_t kept_samples = 0;
    bool below_min = false;
};

ftpo_outcome ftpo_stage(const app_config& cfg, const std::vector<ftpo_sample>& raw,
                        const std::string& out_dir);

struct eval_outcome {
    suppression_report suppression;
    diversity_report diversity_baseline;
    diversity_report diversity_treated;
    double aggregate_normalized = 0.0;
};

eval_outcome eval_stage(const app_config& cfg, const std::vector<corpus_doc>& baseline,
                        const std::vector<corpus_doc>& treated, const banlist& bl,
                        const std::string& out_dir);

void write_manifest(const app_config& cfg, const std::string& run_dir);

struct pipeline_outcome {
    std::string run_dir;
    int iterations = 0;
    size_t final_banlist_size = 0;
    size_t dataset_samples = 0;
    bool dataset_below_min = false;
    double suppression_percent = 0.0;
    double aggregate_normalized = 0.0;
};

pipeline_outcome run_pipeline(const app_config& cfg, const std::string& out_override);

}  // namespace slopguard
