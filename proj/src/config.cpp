#include "slopguard/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "slopguard/errors.hpp"
#include "slopguard/log.hpp"
#include "slopguard/rng.hpp"

namespace slopguard {

namespace {

// stages this toolkit does not run; their keys load without effect
const std::set<std::string>& ignored_keys() {
    static const std::set<std::string> keys = {
        "manage_vllm",
        "generation_hf_dataset_name",
        "generation_hf_dataset_split",
        "generation_chat_template_model_id",
        "generation_system_prompt",
        "generation_logging_level",
        "generation_refusal_detection",
        "enable_slop_phrase_ban",
        "top_n_initial_slop_ban",
        "top_n_subsequent_slop_ban",
    };
    return keys;
}

bool is_ignored_key(const std::string& key) {
    if (ignored_keys().count(key) > 0) return true;
    return key.rfind("vllm_", 0) == 0 || key.rfind("finetune_", 0) == 0;
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key, const char* want) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw config_error("config key " + key + ": expected " + want);
    }
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& key) {
    if (node.IsNull()) return {};
    if (!node.IsSequence()) {
        throw config_error("config key " + key + ": expected a list of strings");
    }
    std::vector<std::string> out;
    for (const auto& item : node) {
        out.push_back(scalar<std::string>(item, key, "a string entry"));
    }
    return out;
}

using setter = std::function<void(app_config&, const YAML::Node&, const std::string&)>;

std::map<std::string, setter> build_setters() {
    std::map<std::string, setter> m;
    auto str = [](std::string app_config::* field) {
        return [field](app_config& c, const YAML::Node& n, const std::string& k) {
            c.*field = scalar<std::string>(n, k, "a string");
        };
    };
    auto intf = [](int app_config::* field) {
        return [field](app_config& c, const YAML::Node& n, const std::string& k) {
            c.*field = scalar<int>(n, k, "an integer");
        };
    };
    auto dbl = [](double app_config::* field) {
        return [field](app_config& c, const YAML::Node& n, const std::string& k) {
            c.*field = scalar<double>(n, k, "a number");
        };
    };
    auto boolean = [](bool app_config::* field) {
        return [field](app_config& c, const YAML::Node& n, const std::string& k) {
            c.*field = scalar<bool>(n, k, "a boolean");
        };
    };
    auto strings = [](std::vector<std::string> app_config::* field) {
        return [field](app_config& c, const YAML::Node& n, const std::string& k) {
            c.*field = string_list(n, k);
        };
    };

    m["experiment_base_dir"] = str(&app_config::experiment_base_dir);
    m["human_profile_path"] = str(&app_config::human_profile_path);
    m["human_ngram_profile_path"] = str(&app_config::human_ngram_profile_path);
    m["log_level"] = str(&app_config::log_level);
    m["num_iterations"] = intf(&app_config::num_iterations);
    m["model_id"] = str(&app_config::model_id);
    m["seed"] = [](app_config& c, const YAML::Node& n, const std::string& k) {
        c.seed = scalar<uint64_t>(n, k, "a non-negative integer");
    };

    m["generation_step_enabled"] = boolean(&app_config::generation_step_enabled);
    m["generation_api_base_url"] = str(&app_config::generation_api_base_url);
    m["generation_model_id"] = str(&app_config::generation_model_id);
    m["generation_api_key"] = str(&app_config::generation_api_key);
    m["generation_mock_spec_path"] = str(&app_config::generation_mock_spec_path);
    m["generation_prompts_path"] = str(&app_config::generation_prompts_path);
    m["generation_max_new_tokens"] = intf(&app_config::generation_max_new_tokens);
    m["generation_threads"] = intf(&app_config::generation_threads);
    m["generation_max_prompts"] = intf(&app_config::generation_max_prompts);
    m["generation_param_chunk_size"] = intf(&app_config::generation_param_chunk_size);
    m["generation_param_top_logprobs_count"] =
        intf(&app_config::generation_param_top_logprobs_count);
    m["generation_param_temperature"] = dbl(&app_config::generation_param_temperature);
    m["generation_param_top_p"] = dbl(&app_config::generation_param_top_p);
    m["generation_param_top_k"] = intf(&app_config::generation_param_top_k);
    m["generation_param_min_p"] = dbl(&app_config::generation_param_min_p);
    m["generation_param_timeout"] = intf(&app_config::generation_param_timeout);
    m["generation_param_stop_sequences"] = strings(&app_config::generation_param_stop_sequences);
    m["generation_param_ban_strength"] = dbl(&app_config::generation_param_ban_strength);
    m["generation_prompt_template"] = str(&app_config::generation_prompt_template);
    m["generation_force_backtrack"] = boolean(&app_config::generation_force_backtrack);
    m["generation_ngram_remove_stopwords"] =
        boolean(&app_config::generation_ngram_remove_stopwords);
    m["generation_ngram_language"] = str(&app_config::generation_ngram_language);

    m["enable_ngram_ban"] = boolean(&app_config::enable_ngram_ban);
    m["min_word_len_for_analysis"] = intf(&app_config::min_word_len_for_analysis);
    m["top_k_bigrams"] = intf(&app_config::top_k_bigrams);
    m["top_k_trigrams"] = intf(&app_config::top_k_trigrams);
    m["dict_bigrams_initial"] = intf(&app_config::dict_bigrams_initial);
    m["dict_bigrams_subsequent"] = intf(&app_config::dict_bigrams_subsequent);
    m["nodict_bigrams_initial"] = intf(&app_config::nodict_bigrams_initial);
    m["nodict_bigrams_subsequent"] = intf(&app_config::nodict_bigrams_subsequent);
    m["dict_trigrams_initial"] = intf(&app_config::dict_trigrams_initial);
    m["dict_trigrams_subsequent"] = intf(&app_config::dict_trigrams_subsequent);
    m["nodict_trigrams_initial"] = intf(&app_config::nodict_trigrams_initial);
    m["nodict_trigrams_subsequent"] = intf(&app_config::nodict_trigrams_subsequent);
    m["extra_ngrams_to_ban"] = strings(&app_config::extra_ngrams_to_ban);
    m["compute_overrep_words"] = boolean(&app_config::compute_overrep_words);
    m["top_k_words_for_overrep_analysis"] =
        intf(&app_config::top_k_words_for_overrep_analysis);
    m["dict_overrep_initial"] = intf(&app_config::dict_overrep_initial);
    m["dict_overrep_subsequent"] = intf(&app_config::dict_overrep_subsequent);
    m["nodict_overrep_initial"] = intf(&app_config::nodict_overrep_initial);
    m["nodict_overrep_subsequent"] = intf(&app_config::nodict_overrep_subsequent);
    m["min_phrase_freq_to_keep"] = intf(&app_config::min_phrase_freq_to_keep);
    m["extra_slop_phrases_to_ban"] = strings(&app_config::extra_slop_phrases_to_ban);
    m["whitelist_strings"] = strings(&app_config::whitelist_strings);
    m["extra_regex_patterns"] = strings(&app_config::extra_regex_patterns);

    m["ftpo_sample_rejected_regularisation_strength"] =
        dbl(&app_config::ftpo_sample_rejected_regularisation_strength);
    m["ftpo_sample_chosen_regularisation_strength"] =
        dbl(&app_config::ftpo_sample_chosen_regularisation_strength);
    m["ftpo_sample_min_chosen_tokens"] = intf(&app_config::ftpo_sample_min_chosen_tokens);
    m["ftpo_min_dataset_size"] = intf(&app_config::ftpo_min_dataset_size);
    m["ftpo_detach_taper"] = boolean(&app_config::ftpo_detach_taper);
    m["ftpo_lambda_mse_target"] = dbl(&app_config::ftpo_lambda_mse_target);
    m["ftpo_tau_mse_target"] = dbl(&app_config::ftpo_tau_mse_target);
    m["ftpo_lambda_mse"] = dbl(&app_config::ftpo_lambda_mse);
    m["ftpo_clip_epsilon_logits"] = dbl(&app_config::ftpo_clip_epsilon_logits);
    return m;
}

}  // namespace

app_config parse_config(const std::string& yaml_text, std::vector<std::string>* ignored_out) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw config_error(std::string("config: bad YAML: ") + e.what());
    }
    if (root.IsNull() || !root.IsDefined()) return app_config{};
    if (!root.IsMap()) throw config_error("config: top level must be a mapping");

    static const std::map<std::string, setter> setters = build_setters();
    app_config cfg;
    for (const auto& kv : root) {
        std::string key = kv.first.as<std::string>();
        if (is_ignored_key(key)) {
            if (ignored_out) ignored_out->push_back(key);
            continue;
        }
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw config_error("unknown config key: " + key);
        }
        if (kv.second.IsNull()) continue;  // explicit null keeps the default
        it->second(cfg, kv.second, key);
    }
    cfg.validate();
    return cfg;
}

app_config load_config(const std::string& path, std::vector<std::string>* ignored_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("config: cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), ignored_out);
}

void app_config::validate() const {
    parse_log_level(log_level);
    if (num_iterations < 1) throw config_error("num_iterations must be at least 1");
    if (generation_max_new_tokens < 1) {
        throw config_error("generation_max_new_tokens must be positive");
    }
    if (generation_threads < 1) throw config_error("generation_threads must be positive");
    if (generation_max_prompts < 0) throw config_error("generation_max_prompts must be >= 0");
    if (generation_param_chunk_size < 1) {
        throw config_error("generation_param_chunk_size must be positive");
    }
    if (generation_param_top_logprobs_count < 1) {
        throw config_error("generation_param_top_logprobs_count must be positive");
    }
    if (!(generation_param_temperature > 0.0)) {
        throw config_error("generation_param_temperature must be > 0");
    }
    if (!(generation_param_top_p > 0.0) || generation_param_top_p > 1.0) {
        throw config_error("generation_param_top_p must lie in (0, 1]");
    }
    if (generation_param_top_k < 0) throw config_error("generation_param_top_k must be >= 0");
    if (!(generation_param_min_p >= 0.0) || generation_param_min_p >= 1.0) {
        throw config_error("generation_param_min_p must lie in [0, 1)");
    }
    if (generation_param_timeout < 1) {
        throw config_error("generation_param_timeout must be positive");
    }
    if (!(generation_param_ban_strength >= 0.0 && generation_param_ban_strength <= 1.0)) {
        throw config_error("generation_param_ban_strength must lie in [0, 1]");
    }
    if (min_word_len_for_analysis < 1) {
        throw config_error("min_word_len_for_analysis must be positive");
    }
    const struct {
        const char* name;
        int value;
    } non_negative[] = {
        {"top_k_bigrams", top_k_bigrams},
        {"top_k_trigrams", top_k_trigrams},
        {"top_k_words_for_overrep_analysis", top_k_words_for_overrep_analysis},
        {"dict_bigrams_initial", dict_bigrams_initial},
        {"dict_bigrams_subsequent", dict_bigrams_subsequent},
        {"nodict_bigrams_initial", nodict_bigrams_initial},
        {"nodict_bigrams_subsequent", nodict_bigrams_subsequent},
        {"dict_trigrams_initial", dict_trigrams_initial},
        {"dict_trigrams_subsequent", dict_trigrams_subsequent},
        {"nodict_trigrams_initial", nodict_trigrams_initial},
        {"nodict_trigrams_subsequent", nodict_trigrams_subsequent},
        {"dict_overrep_initial", dict_overrep_initial},
        {"dict_overrep_subsequent", dict_overrep_subsequent},
        {"nodict_overrep_initial", nodict_overrep_initial},
        {"nodict_overrep_subsequent", nodict_overrep_subsequent},
        {"min_phrase_freq_to_keep", min_phrase_freq_to_keep},
        {"ftpo_min_dataset_size", ftpo_min_dataset_size},
    };
    for (const auto& nn : non_negative) {
        if (nn.value < 0) {
            throw config_error(std::string(nn.name) + " must be >= 0");
        }
    }
    if (!(ftpo_sample_rejected_regularisation_strength >= 0.0 &&
          ftpo_sample_rejected_regularisation_strength <= 1.0) ||
        !(ftpo_sample_chosen_regularisation_strength >= 0.0 &&
          ftpo_sample_chosen_regularisation_strength <= 1.0)) {
        throw config_error("ftpo regularisation strengths must lie in [0, 1]");
    }
    if (ftpo_sample_min_chosen_tokens < 1) {
        throw config_error("ftpo_sample_min_chosen_tokens must be positive");
    }
    if (!(ftpo_clip_epsilon_logits > 0.0)) {
        throw config_error("ftpo_clip_epsilon_logits must be > 0");
    }
    if (!(ftpo_tau_mse_target >= 0.0)) {
        throw config_error("ftpo_tau_mse_target must be >= 0");
    }
    if (!(ftpo_lambda_mse_target >= 0.0) || !(ftpo_lambda_mse >= 0.0)) {
        throw config_error("ftpo lambda weights must be >= 0");
    }
}

namespace {

void emit_str(YAML::Emitter& out, const char* key, const std::string& value) {
    out << YAML::Key << key << YAML::Value << YAML::DoubleQuoted << value;
}

void emit_list(YAML::Emitter& out, const char* key, const std::vector<std::string>& values) {
    out << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (const auto& v : values) out << YAML::DoubleQuoted << v;
    out << YAML::EndSeq;
}

}  // namespace

std::string emit_config(const app_config& cfg) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    emit_str(out, "experiment_base_dir", cfg.experiment_base_dir);
    emit_str(out, "human_profile_path", cfg.human_profile_path);
    emit_str(out, "human_ngram_profile_path", cfg.human_ngram_profile_path);
    emit_str(out, "log_level", cfg.log_level);
    out << YAML::Key << "num_iterations" << YAML::Value << cfg.num_iterations;
    emit_str(out, "model_id", cfg.model_id);
    out << YAML::Key << "seed" << YAML::Value << cfg.seed;

    out << YAML::Key << "generation_step_enabled" << YAML::Value
        << cfg.generation_step_enabled;
    emit_str(out, "generation_api_base_url", cfg.generation_api_base_url);
    emit_str(out, "generation_model_id", cfg.generation_model_id);
    emit_str(out, "generation_api_key", cfg.generation_api_key);
    emit_str(out, "generation_mock_spec_path", cfg.generation_mock_spec_path);
    emit_str(out, "generation_prompts_path", cfg.generation_prompts_path);
    out << YAML::Key << "generation_max_new_tokens" << YAML::Value
        << cfg.generation_max_new_tokens;
    out << YAML::Key << "generation_threads" << YAML::Value << cfg.generation_threads;
    out << YAML::Key << "generation_max_prompts" << YAML::Value << cfg.generation_max_prompts;
    out << YAML::Key << "generation_param_chunk_size" << YAML::Value
        << cfg.generation_param_chunk_size;
    out << YAML::Key << "generation_param_top_logprobs_count" << YAML::Value
        << cfg.generation_param_top_logprobs_count;
    out << YAML::Key << "generation_param_temperature" << YAML::Value
        << cfg.generation_param_temperature;
    out << YAML::Key << "generation_param_top_p" << YAML::Value << cfg.generation_param_top_p;
    out << YAML::Key << "generation_param_top_k" << YAML::Value << cfg.generation_param_top_k;
    out << YAML::Key << "generation_param_min_p" << YAML::Value << cfg.generation_param_min_p;
    out << YAML::Key << "generation_param_timeout" << YAML::Value
        << cfg.generation_param_timeout;
    emit_list(out, "generation_param_stop_sequences", cfg.generation_param_stop_sequences);
    out << YAML::Key << "generation_param_ban_strength" << YAML::Value
        << cfg.generation_param_ban_strength;
    emit_str(out, "generation_prompt_template", cfg.generation_prompt_template);
    out << YAML::Key << "generation_force_backtrack" << YAML::Value
        << cfg.generation_force_backtrack;
    out << YAML::Key << "generation_ngram_remove_stopwords" << YAML::Value
        << cfg.generation_ngram_remove_stopwords;
    emit_str(out, "generation_ngram_language", cfg.generation_ngram_language);

    out << YAML::Key << "enable_ngram_ban" << YAML::Value << cfg.enable_ngram_ban;
    out << YAML::Key << "min_word_len_for_analysis" << YAML::Value
        << cfg.min_word_len_for_analysis;
    out << YAML::Key << "top_k_bigrams" << YAML::Value << cfg.top_k_bigrams;
    out << YAML::Key << "top_k_trigrams" << YAML::Value << cfg.top_k_trigrams;
    out << YAML::Key << "dict_bigrams_initial" << YAML::Value << cfg.dict_bigrams_initial;
    out << YAML::Key << "dict_bigrams_subsequent" << YAML::Value
        << cfg.dict_bigrams_subsequent;
    out << YAML::Key << "nodict_bigrams_initial" << YAML::Value << cfg.nodict_bigrams_initial;
    out << YAML::Key << "nodict_bigrams_subsequent" << YAML::Value
        << cfg.nodict_bigrams_subsequent;
    out << YAML::Key << "dict_trigrams_initial" << YAML::Value << cfg.dict_trigrams_initial;
    out << YAML::Key << "dict_trigrams_subsequent" << YAML::Value
        << cfg.dict_trigrams_subsequent;
    out << YAML::Key << "nodict_trigrams_initial" << YAML::Value
        << cfg.nodict_trigrams_initial;
    out << YAML::Key << "nodict_trigrams_subsequent" << YAML::Value
        << cfg.nodict_trigrams_subsequent;
    emit_list(out, "extra_ngrams_to_ban", cfg.extra_ngrams_to_ban);
    out << YAML::Key << "compute_overrep_words" << YAML::Value << cfg.compute_overrep_words;
    out << YAML::Key << "top_k_words_for_overrep_analysis" << YAML::Value
        << cfg.top_k_words_for_overrep_analysis;
    out << YAML::Key << "dict_overrep_initial" << YAML::Value << cfg.dict_overrep_initial;
    out << YAML::Key << "dict_overrep_subsequent" << YAML::Value
        << cfg.dict_overrep_subsequent;
    out << YAML::Key << "nodict_overrep_initial" << YAML::Value << cfg.nodict_overrep_initial;
    out << YAML::Key << "nodict_overrep_subsequent" << YAML::Value
        << cfg.nodict_overrep_subsequent;
    out << YAML::Key << "min_phrase_freq_to_keep" << YAML::Value
        << cfg.min_phrase_freq_to_keep;
    emit_list(out, "extra_slop_phrases_to_ban", cfg.extra_slop_phrases_to_ban);
    emit_list(out, "whitelist_strings", cfg.whitelist_strings);
    emit_list(out, "extra_regex_patterns", cfg.extra_regex_patterns);

    out << YAML::Key << "ftpo_sample_rejected_regularisation_strength" << YAML::Value
        << cfg.ftpo_sample_rejected_regularisation_strength;
    out << YAML::Key << "ftpo_sample_chosen_regularisation_strength" << YAML::Value
        << cfg.ftpo_sample_chosen_regularisation_strength;
    out << YAML::Key << "ftpo_sample_min_chosen_tokens" << YAML::Value
        << cfg.ftpo_sample_min_chosen_tokens;
    out << YAML::Key << "ftpo_min_dataset_size" << YAML::Value << cfg.ftpo_min_dataset_size;
    out << YAML::Key << "ftpo_detach_taper" << YAML::Value << cfg.ftpo_detach_taper;
    out << YAML::Key << "ftpo_lambda_mse_target" << YAML::Value << cfg.ftpo_lambda_mse_target;
    out << YAML::Key << "ftpo_tau_mse_target" << YAML::Value << cfg.ftpo_tau_mse_target;
    out << YAML::Key << "ftpo_lambda_mse" << YAML::Value << cfg.ftpo_lambda_mse;
    out << YAML::Key << "ftpo_clip_epsilon_logits" << YAML::Value
        << cfg.ftpo_clip_epsilon_logits;
    out << YAML::EndMap;
    if (!out.good()) throw internal_error("config: YAML emission failed");
    std::string doc = out.c_str();
    doc += "\n";
    return doc;
}

bool config_equal(const app_config& a, const app_config& b) {
    // the emitter covers every in-scope field, so emission equality is
    // field equality
    return emit_config(a) == emit_config(b);
}

std::string digest_hex(const std::string& bytes) {
    uint64_t h = hash_bytes(bytes);
    static const char* hexdig = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = hexdig[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::string digest_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return digest_hex(buf.str());
}

}  // namespace slopguard
