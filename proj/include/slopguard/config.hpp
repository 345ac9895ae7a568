#pragma once

// One YAML file drives the whole pipeline.  Key names follow the reference
// config surface for every concept this toolkit implements; keys belonging
// to the out-of-scope stages (server management, dataset download, model
// training, refusal detection) are accepted and ignored with a warning so
// existing files load unchanged.  Anything else unknown is rejected by
// name.  A few keys are additions of this implementation and are marked
// below.

#include <cstdint>
#include <string>
#include <vector>

namespace slopguard {

struct app_config {
    // run setup
    std::string experiment_base_dir = "results/runs";
    std::string human_profile_path;        // word baseline TSV
    std::string human_ngram_profile_path;  // addition: n-gram baseline TSV
    std::string log_level = "INFO";
    int num_iterations = 2;
    std::string model_id;
    uint64_t seed = 0;  // addition: master seed for all derived streams

    // generation
    bool generation_step_enabled = true;
    std::string generation_api_base_url;  // unset + mock spec set → mock backend
    std::string generation_model_id;
    std::string generation_api_key;
    std::string generation_mock_spec_path;  // addition
    std::string generation_prompts_path;    // addition: prompts JSONL
    int generation_max_new_tokens = 1000;
    int generation_threads = 50;
    int generation_max_prompts = 2000;
    int generation_param_chunk_size = 20;
    int generation_param_top_logprobs_count = 20;
    double generation_param_temperature = 1.0;
    double generation_param_top_p = 1.0;
    int generation_param_top_k = 50;
    double generation_param_min_p = 0.01;
    int generation_param_timeout = 480;
    std::vector<std::string> generation_param_stop_sequences;
    double generation_param_ban_strength = 1.0;  // addition
    std::string generation_prompt_template =
        "Writing prompt: {prompt}\n\nWrite 1000 words to this prompt. Your response:\n";
    bool generation_force_backtrack = false;
    bool generation_ngram_remove_stopwords = true;
    std::string generation_ngram_language = "english";

    // pattern analysis and banning
    bool enable_ngram_ban = true;
    int min_word_len_for_analysis = 3;
    int top_k_bigrams = 5000;
    int top_k_trigrams = 5000;
    int dict_bigrams_initial = 300;
    int dict_bigrams_subsequent = 0;
    int nodict_bigrams_initial = 200;
    int nodict_bigrams_subsequent = 0;
    int dict_trigrams_initial = 300;
    int dict_trigrams_subsequent = 0;
    int nodict_trigrams_initial = 200;
    int nodict_trigrams_subsequent = 0;
    std::vector<std::string> extra_ngrams_to_ban;
    bool compute_overrep_words = true;
    int top_k_words_for_overrep_analysis = 200000;
    int dict_overrep_initial = 920;
    int dict_overrep_subsequent = 0;
    int nodict_overrep_initial = 80;
    int nodict_overrep_subsequent = 0;
    int min_phrase_freq_to_keep = 2;
    std::vector<std::string> extra_slop_phrases_to_ban;
    std::vector<std::string> whitelist_strings;
    std::vector<std::string> extra_regex_patterns;

    // ftpo dataset and loss
    double ftpo_sample_rejected_regularisation_strength = 0.8;
    double ftpo_sample_chosen_regularisation_strength = 0.2;
    int ftpo_sample_min_chosen_tokens = 4;
    int ftpo_min_dataset_size = 0;   // addition: below this → warning flag
    bool ftpo_detach_taper = false;  // addition: taper weights as constants in the gradient
    double ftpo_lambda_mse_target = 0.05;
    double ftpo_tau_mse_target = 0.5;
    double ftpo_lambda_mse = 0.4;
    double ftpo_clip_epsilon_logits = 2.0;

    void validate() const;  // throws config_error on bad ranges
};

// throws config_error on unknown keys (named) or bad values; out-of-scope
// keys are appended to ignored_out (one warning string each)
app_config load_config(const std::string& path, std::vector<std::string>* ignored_out = nullptr);
app_config parse_config(const std::string& yaml_text,
                        std::vector<std::string>* ignored_out = nullptr);

// YAML document holding every in-scope key; parse(emit(cfg)) == cfg
std::string emit_config(const app_config& cfg);

bool config_equal(const app_config& a, const app_config& b);

// 64-bit FNV-1a digest as 16 hex chars, used for manifest bookkeeping
std::string digest_hex(const std::string& bytes);
std::string digest_file_hex(const std::string& path);  // throws data_error when unreadable

}  // namespace slopguard
