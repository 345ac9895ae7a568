#include "slopguard/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/ftpo_eval.hpp"
#include "slopguard/http_backend.hpp"
#include "slopguard/log.hpp"
#include "slopguard/mock_backend.hpp"
#include "slopguard/rng.hpp"

namespace fs = std::filesystem;

namespace slopguard {

namespace {

constexpr const char* tool_version = "0.1.0";

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw data_error("write failed: " + path);
}

}  // namespace

std::vector<prompt_item> load_prompts_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("generation_prompts_path: cannot open: " + path);
    std::vector<prompt_item> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno += 1;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": bad JSON: " << e.what();
            throw data_error(msg.str());
        }
        prompt_item p;
        if (j.contains("prompt_id")) {
            if (j["prompt_id"].is_string()) {
                p.prompt_id = j["prompt_id"].get<std::string>();
            } else if (j["prompt_id"].is_number_integer()) {
                p.prompt_id = std::to_string(j["prompt_id"].get<int64_t>());
            }
        }
        if (p.prompt_id.empty()) p.prompt_id = std::to_string(lineno - 1);
        if (j.contains("prompt") && j["prompt"].is_string()) {
            p.prompt = j["prompt"].get<std::string>();
        } else if (j.contains("text") && j["text"].is_string()) {
            p.prompt = j["text"].get<std::string>();
        } else {
            std::ostringstream msg;
            msg << path << ":" << lineno << ": expected a prompt field";
            throw data_error(msg.str());
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::string apply_prompt_template(const std::string& tmpl, const std::string& prompt) {
    static const std::string placeholder = "{prompt}";
    std::string out;
    size_t from = 0;
    while (true) {
        size_t at = tmpl.find(placeholder, from);
        if (at == std::string::npos) {
            out.append(tmpl, from, std::string::npos);
            return out;
        }
        out.append(tmpl, from, at - from);
        out += prompt;
        from = at + placeholder.size();
    }
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw data_error("cannot create directory: " + path + ": " + ec.message());
}

std::string make_run_dir(const std::string& base_dir) {
    ensure_dir(base_dir);
    std::time_t now = std::time(nullptr);
    std::tm tmv{};
    gmtime_r(&now, &tmv);
    char buf[32];
    std::strftime(buf, sizeof(buf), "run_%Y%m%d_%H%M%S", &tmv);
    std::string stem = base_dir + "/" + buf;
    std::string candidate = stem;
    int k = 1;
    while (fs::exists(candidate)) candidate = stem + "_" + std::to_string(k++);
    ensure_dir(candidate);
    return candidate;
}

banlist config_banlist(const app_config& cfg) {
    std::vector<std::vector<std::string>> ngrams;
    for (const auto& raw : cfg.extra_ngrams_to_ban) {
        std::vector<std::string> words;
        std::istringstream in(raw);
        std::string w;
        while (in >> w) words.push_back(w);
        ngrams.push_back(std::move(words));
    }
    return compile_banlist(cfg.extra_slop_phrases_to_ban, ngrams, cfg.extra_regex_patterns,
                           cfg.whitelist_strings, cfg.min_word_len_for_analysis,
                           cfg.generation_ngram_remove_stopwords);
}

namespace {

baseline_table load_baseline_checked(const std::string& path, const char* key,
                                     gram_kind kind, bool required) {
    if (path.empty()) {
        if (required) throw config_error(std::string(key) + " is required for profiling");
        return baseline_table{kind, {}};
    }
    if (!fs::exists(path)) {
        throw config_error(std::string(key) + ": no such file: " + path);
    }
    baseline_table t = load_baseline_tsv(path, kind);
    t.kind = kind;
    return t;
}

}  // namespace

profile_outcome profile_stage(const app_config& cfg, const std::vector<corpus_doc>& corpus,
                              const banlist& already, bool initial_quotas,
                              const std::string& out_dir) {
    ensure_dir(out_dir);
    baseline_table word_base = load_baseline_checked(cfg.human_profile_path,
                                                     "human_profile_path", gram_kind::word,
                                                     true);
    baseline_table ngram_base =
        load_baseline_checked(cfg.human_ngram_profile_path, "human_ngram_profile_path",
                              gram_kind::bigram, false);
    if (cfg.human_ngram_profile_path.empty()) {
        log_warn("human_ngram_profile_path unset, every n-gram will classify as nodict");
    }

    freq_table words =
        count_patterns(corpus, gram_kind::word, cfg.min_word_len_for_analysis, false);
    freq_table bigrams = count_patterns(corpus, gram_kind::bigram, cfg.min_word_len_for_analysis,
                                        cfg.generation_ngram_remove_stopwords);
    freq_table trigrams = count_patterns(corpus, gram_kind::trigram,
                                         cfg.min_word_len_for_analysis,
                                         cfg.generation_ngram_remove_stopwords);

    profile_outcome out;
    out.profile = build_profile(words, bigrams, trigrams, word_base, ngram_base);

    // analysis caps bound the candidate pool for banlist selection
    auto cap = [](std::vector<profile_entry>& v, int top_k) {
        if (top_k >= 0 && v.size() > static_cast<size_t>(top_k)) {
            v.resize(static_cast<size_t>(top_k));
        }
    };
    cap(out.profile.words, cfg.top_k_words_for_overrep_analysis);
    cap(out.profile.bigrams, cfg.top_k_bigrams);
    cap(out.profile.trigrams, cfg.top_k_trigrams);

    banlist_quotas quotas;
    if (initial_quotas) {
        quotas.dict_words = cfg.dict_overrep_initial;
        quotas.nodict_words = cfg.nodict_overrep_initial;
        quotas.dict_bigrams = cfg.dict_bigrams_initial;
        quotas.nodict_bigrams = cfg.nodict_bigrams_initial;
        quotas.dict_trigrams = cfg.dict_trigrams_initial;
        quotas.nodict_trigrams = cfg.nodict_trigrams_initial;
    } else {
        quotas.dict_words = cfg.dict_overrep_subsequent;
        quotas.nodict_words = cfg.nodict_overrep_subsequent;
        quotas.dict_bigrams = cfg.dict_bigrams_subsequent;
        quotas.nodict_bigrams = cfg.nodict_bigrams_subsequent;
        quotas.dict_trigrams = cfg.dict_trigrams_subsequent;
        quotas.nodict_trigrams = cfg.nodict_trigrams_subsequent;
    }
    if (!cfg.compute_overrep_words) quotas.dict_words = quotas.nodict_words = 0;
    if (!cfg.enable_ngram_ban) {
        quotas.dict_bigrams = quotas.nodict_bigrams = 0;
        quotas.dict_trigrams = quotas.nodict_trigrams = 0;
    }

    banlist_additions additions =
        build_banlist(out.profile, quotas, cfg.whitelist_strings, already,
                      static_cast<uint64_t>(cfg.min_phrase_freq_to_keep));
    out.added_words = additions.words.size();
    out.added_ngrams = additions.ngrams.size();
    out.merged = extend_banlist(already, additions.words, additions.ngrams);

    write_text_file(out_dir + "/profile.json", profile_to_json(out.profile));
    save_banlist_json(out.merged, out_dir + "/banlist.json");
    return out;
}

namespace {

std::unique_ptr<backend> make_backend(const app_config& cfg) {
    if (!cfg.generation_api_base_url.empty()) {
        http_backend_config hc;
        hc.base_url = cfg.generation_api_base_url;
        hc.api_key = cfg.generation_api_key;
        hc.model = cfg.generation_model_id.empty() ? cfg.model_id : cfg.generation_model_id;
        hc.timeout_seconds = cfg.generation_param_timeout;
        hc.max_in_flight = cfg.generation_threads;
        return std::make_unique<http_backend>(hc);
    }
    if (!cfg.generation_mock_spec_path.empty()) {
        if (!fs::exists(cfg.generation_mock_spec_path)) {
            throw config_error("generation_mock_spec_path: no such file: " +
                               cfg.generation_mock_spec_path);
        }
        mock_model_spec spec = load_mock_spec_json(cfg.generation_mock_spec_path);
        return std::make_unique<mock_backend>(std::move(spec));
    }
    throw config_error(
        "set generation_api_base_url or generation_mock_spec_path to pick a backend");
}

sampler_config make_sampler_config(const app_config& cfg) {
    sampler_config sc;
    sc.sampling.temperature = cfg.generation_param_temperature;
    sc.sampling.top_p = cfg.generation_param_top_p;
    sc.sampling.top_k = cfg.generation_param_top_k;
    sc.sampling.min_p = cfg.generation_param_min_p;
    sc.ban_strength = cfg.generation_param_ban_strength;
    sc.force_backtrack = cfg.generation_force_backtrack;
    sc.chunk_size = cfg.generation_param_chunk_size;
    sc.max_new_tokens = cfg.generation_max_new_tokens;
    sc.top_logprobs = cfg.generation_param_top_logprobs_count;
    sc.stop_sequences = cfg.generation_param_stop_sequences;
    return sc;
}

}  // namespace

generation_artifacts generate_stage(const app_config& cfg, const banlist& bl,
                                    const std::vector<prompt_item>& prompts,
                                    const std::string& out_dir) {
    ensure_dir(out_dir);
    auto t0 = std::chrono::steady_clock::now();

    std::vector<prompt_item> todo = prompts;
    if (todo.size() > static_cast<size_t>(cfg.generation_max_prompts)) {
        todo.resize(static_cast<size_t>(cfg.generation_max_prompts));
    }

    generation_artifacts art;
    std::unique_ptr<backend> be;
    std::vector<generation_result> results(todo.size());
    std::vector<std::string> templated(todo.size());
    std::vector<char> done(todo.size(), 0);
    std::exception_ptr first_error;

    if (!todo.empty()) {
        be = make_backend(cfg);

        // a cheap request up front so a server without logprob support is
        // rejected before any real generation
        if (!cfg.generation_api_base_url.empty()) {
            chunk_request probe;
            probe.prompt = apply_prompt_template(cfg.generation_prompt_template,
                                                 todo.front().prompt);
            probe.max_tokens = 1;
            probe.top_logprobs = cfg.generation_param_top_logprobs_count;
            probe.seed = derive_seed(cfg.seed, stream_backend);
            be->next_chunk(probe);
        }

        const sampler_config sc = make_sampler_config(cfg);
        for (size_t i = 0; i < todo.size(); ++i) {
            templated[i] = apply_prompt_template(cfg.generation_prompt_template, todo[i].prompt);
        }

        std::atomic<size_t> next{0};
        std::atomic<bool> abort_rest{false};
        std::mutex err_mu;

        auto worker = [&]() {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= todo.size() || abort_rest.load()) return;
                try {
                    uint64_t seed_i = derive_seed(cfg.seed, static_cast<uint64_t>(i));
                    results[i] = generate(*be, templated[i], bl, sc, seed_i);
                    done[i] = 1;
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    abort_rest.store(true);
                    return;
                }
            }
        };

        size_t nworkers = std::min<size_t>(static_cast<size_t>(cfg.generation_threads),
                                           todo.size());
        if (nworkers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (size_t w = 0; w < nworkers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
    }

    // flush whatever completed, in prompt order
    std::ostringstream events_out;
    nlohmann::ordered_json events_index = nlohmann::ordered_json::object();
    nlohmann::ordered_json per_prompt = nlohmann::ordered_json::array();
    size_t event_line = 1;

    for (size_t i = 0; i < todo.size(); ++i) {
        if (!done[i]) {
            art.prompts_failed += 1;
            continue;
        }
        const generation_result& r = results[i];
        art.corpus.push_back({todo[i].prompt_id, r.text});

        nlohmann::ordered_json slot;
        slot["first_line"] = event_line;
        slot["count"] = r.events.size();
        events_index[todo[i].prompt_id] = std::move(slot);
        for (const auto& ev : r.events) {
            events_out << event_to_jsonl(ev) << "\n";
            event_line += 1;
            std::optional<ftpo_sample> s =
                capture_sample(ev, templated[i], bl, todo[i].prompt_id,
                               cfg.ftpo_sample_min_chosen_tokens);
            if (s.has_value()) art.captures.push_back(std::move(*s));
        }
        art.total_events += r.events.size();

        art.totals.tokens_kept += r.stats.tokens_kept;
        art.totals.tokens_discarded += r.stats.tokens_discarded;
        art.totals.backtracks += r.stats.backtracks;
        art.totals.lets_through += r.stats.lets_through;
        art.totals.backend_calls += r.stats.backend_calls;

        nlohmann::ordered_json pj = nlohmann::ordered_json::parse(stats_to_json(r.stats));
        pj["prompt_id"] = todo[i].prompt_id;
        per_prompt.push_back(std::move(pj));
    }

    auto t1 = std::chrono::steady_clock::now();
    art.totals.elapsed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

    save_corpus_jsonl(art.corpus, out_dir + "/corpus.jsonl");
    write_text_file(out_dir + "/events.jsonl", events_out.str());
    write_text_file(out_dir + "/events_index.json", events_index.dump(2) + "\n");
    nlohmann::ordered_json stats_doc;
    stats_doc["totals"] = nlohmann::ordered_json::parse(stats_to_json(art.totals));
    stats_doc["per_prompt"] = std::move(per_prompt);
    write_text_file(out_dir + "/stats.json", stats_doc.dump(2) + "\n");
    write_dataset(art.captures, out_dir + "/captures.jsonl");

    if (first_error) std::rethrow_exception(first_error);
    return art;
}

ftpo_outcome ftpo_stage(const app_config& cfg, const std::vector<ftpo_sample>& raw,
                        const std::string& out_dir) {
    ensure_dir(out_dir);
    ftpo_outcome out;
    out.raw_samples = raw.size();

    std::vector<ftpo_sample> kept =
        regularize_dataset(raw, cfg.ftpo_sample_rejected_regularisation_strength,
                           cfg.ftpo_sample_chosen_regularisation_strength, cfg.seed);
    out.kept_samples = kept.size();
    if (static_cast<int>(kept.size()) < cfg.ftpo_min_dataset_size) {
        out.below_min = true;
        log_warn("ftpo dataset has " + std::to_string(kept.size()) +
                 " samples, below ftpo_min_dataset_size=" +
                 std::to_string(cfg.ftpo_min_dataset_size));
    }
    write_dataset(kept, out_dir + "/dataset.jsonl");

    ftpo_params params;
    params.margin = cfg.ftpo_clip_epsilon_logits;
    params.tau_target = cfg.ftpo_tau_mse_target;
    params.lambda_target = cfg.ftpo_lambda_mse_target;
    params.lambda_nontarget = cfg.ftpo_lambda_mse;
    params.detach_taper = cfg.ftpo_detach_taper;
    batch_report report = batch_eval(kept, make_mock_logit_provider(cfg.seed), params);

    nlohmann::ordered_json j;
    j["raw_samples"] = out.raw_samples;
    j["kept_samples"] = out.kept_samples;
    j["below_min"] = out.below_min;
    j["batch"] = nlohmann::ordered_json::parse(report_to_json(report));
    write_text_file(out_dir + "/report.json", j.dump(2) + "\n");
    return out;
}

eval_outcome eval_stage(const app_config& cfg, const std::vector<corpus_doc>& baseline,
                        const std::vector<corpus_doc>& treated, const banlist& bl,
                        const std::string& out_dir) {
    (void)cfg;
    ensure_dir(out_dir);
    std::vector<std::string> base_texts, treat_texts;
    for (const auto& d : baseline) base_texts.push_back(d.text);
    for (const auto& d : treated) treat_texts.push_back(d.text);

    eval_outcome out;
    out.suppression = suppression_rate(base_texts, treat_texts, bl);
    out.diversity_baseline = diversity(base_texts);
    out.diversity_treated = diversity(treat_texts);
    out.aggregate_normalized = normalized_aggregate(out.diversity_treated,
                                                    out.diversity_baseline);

    nlohmann::ordered_json j;
    j["suppression"] = nlohmann::ordered_json::parse(suppression_to_json(out.suppression));
    j["diversity_baseline"] =
        nlohmann::ordered_json::parse(diversity_to_json(out.diversity_baseline));
    j["diversity_treated"] =
        nlohmann::ordered_json::parse(diversity_to_json(out.diversity_treated));
    j["aggregate_normalized"] = out.aggregate_normalized;
    write_text_file(out_dir + "/report.json", j.dump(2) + "\n");
    write_text_file(out_dir + "/diversity_baseline.csv", diversity_csv(base_texts));
    write_text_file(out_dir + "/diversity_treated.csv", diversity_csv(treat_texts));
    return out;
}

void write_manifest(const app_config& cfg, const std::string& run_dir) {
    nlohmann::ordered_json j;
    j["tool"] = "slopguard";
    j["version"] = tool_version;
    j["seed"] = cfg.seed;
    j["config_digest"] = digest_hex(emit_config(cfg));
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    const std::string* paths[] = {&cfg.human_profile_path, &cfg.human_ngram_profile_path,
                                  &cfg.generation_prompts_path, &cfg.generation_mock_spec_path};
    for (const auto* p : paths) {
        if (p->empty() || !fs::exists(*p)) continue;
        inputs[*p] = digest_file_hex(*p);
    }
    j["inputs"] = std::move(inputs);
    write_text_file(run_dir + "/manifest.json", j.dump(2) + "\n");
}

pipeline_outcome run_pipeline(const app_config& cfg, const std::string& out_override) {
    if (!cfg.generation_step_enabled) {
        throw config_error("pipeline requires generation_step_enabled: true");
    }
    if (cfg.generation_prompts_path.empty()) {
        throw config_error("generation_prompts_path is required for the pipeline");
    }
    std::vector<prompt_item> prompts = load_prompts_jsonl(cfg.generation_prompts_path);

    pipeline_outcome out;
    out.run_dir = out_override.empty() ? make_run_dir(cfg.experiment_base_dir) : out_override;
    ensure_dir(out.run_dir);
    write_manifest(cfg, out.run_dir);

    banlist user_bl = config_banlist(cfg);
    banlist current;  // grows across iterations
    banlist empty_bl;
    banlist last_active;
    std::vector<corpus_doc> corpus0;
    std::vector<corpus_doc> last_corpus;
    std::vector<ftpo_sample> captures;
    std::vector<slop_fingerprint> fingerprints;
    std::vector<std::string> fp_names;

    for (int it = 0; it < cfg.num_iterations; ++it) {
        std::string iter_dir = out.run_dir + "/iter_" + std::to_string(it);
        log_info("iteration " + std::to_string(it) + ": generating " +
                 std::to_string(prompts.size()) + " prompts");
        const banlist& gen_bl = (it == 0) ? empty_bl : current;

        generation_artifacts art = generate_stage(cfg, gen_bl, prompts, iter_dir);
        last_active = gen_bl;
        last_corpus = art.corpus;
        if (it == 0) corpus0 = art.corpus;
        if (it >= 1) {
            captures.insert(captures.end(), art.captures.begin(), art.captures.end());
        }

        // iteration 0 seeds the banlist from the untreated corpus under the
        // initial quotas; later rounds only add emergent patterns
        profile_outcome prof = profile_stage(cfg, art.corpus, it == 0 ? user_bl : current,
                                             it == 0, iter_dir);
        current = std::move(prof.merged);
        fingerprints.push_back(prof.profile.fingerprint);
        fp_names.push_back("iter" + std::to_string(it));
        log_info("iteration " + std::to_string(it) + ": banlist now " +
                 std::to_string(current.entries.size()) + " patterns (+" +
                 std::to_string(prof.added_words + prof.added_ngrams) + ")");
    }

    if (fingerprints.size() >= 2) {
        write_text_file(out.run_dir + "/distance_matrix.csv",
                        distance_matrix_csv(fp_names, fingerprints));
    }
    save_banlist_json(current, out.run_dir + "/final_banlist.json");

    ftpo_outcome fo = ftpo_stage(cfg, captures, out.run_dir + "/ftpo");
    eval_outcome eo = eval_stage(cfg, corpus0, last_corpus, last_active, out.run_dir + "/eval");

    out.iterations = cfg.num_iterations;
    out.final_banlist_size = current.entries.size();
    out.dataset_samples = fo.kept_samples;
    out.dataset_below_min = fo.below_min;
    out.suppression_percent = eo.suppression.percent;
    out.aggregate_normalized = eo.aggregate_normalized;
    return out;
}

}  // namespace slopguard
