// slopguard: profile a corpus for over-used patterns, generate with the
// backtracking sampler, build preference datasets, and score the results.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slopguard/banlist.hpp"
#include "slopguard/config.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/ftpo_data.hpp"
#include "slopguard/log.hpp"
#include "slopguard/pipeline.hpp"
#include "slopguard/profiler.hpp"

namespace {

using namespace slopguard;

struct cli_options {
    std::string config_path;
    std::string out_dir;
    std::string log_level_name;
    uint64_t seed = 0;
    bool seed_set = false;

    std::vector<std::string> corpus_paths;  // profile
    std::string banlist_path;               // profile, generate, eval
    bool subsequent_quotas = false;         // profile

    std::vector<std::string> capture_paths;  // ftpo

    std::string baseline_path;  // eval
    std::string treated_path;   // eval
};

app_config load_effective_config(const cli_options& opt) {
    if (opt.config_path.empty()) throw config_error("--config is required");
    std::vector<std::string> ignored;
    app_config cfg = load_config(opt.config_path, &ignored);
    for (const auto& key : ignored) {
        log_warn("config key out of scope here, ignored: " + key);
    }
    if (opt.seed_set) cfg.seed = opt.seed;
    if (!opt.log_level_name.empty()) cfg.log_level = opt.log_level_name;
    set_log_level(parse_log_level(cfg.log_level));
    return cfg;
}

std::string pick_out_dir(const cli_options& opt, const app_config& cfg) {
    if (!opt.out_dir.empty()) {
        ensure_dir(opt.out_dir);
        return opt.out_dir;
    }
    return make_run_dir(cfg.experiment_base_dir);
}

banlist load_banlist_or_config(const cli_options& opt, const app_config& cfg) {
    if (!opt.banlist_path.empty()) {
        return load_banlist_json(opt.banlist_path,
                                 static_cast<size_t>(cfg.min_word_len_for_analysis));
    }
    return config_banlist(cfg);
}

int run_profile(const cli_options& opt) {
    app_config cfg = load_effective_config(opt);
    if (opt.corpus_paths.empty()) throw config_error("profile: pass at least one --corpus");
    std::string out = pick_out_dir(opt, cfg);
    banlist already = load_banlist_or_config(opt, cfg);

    std::vector<slop_fingerprint> fps;
    std::vector<std::string> names;
    bool merged_written = false;
    for (size_t i = 0; i < opt.corpus_paths.size(); ++i) {
        std::vector<corpus_doc> corpus = load_corpus_jsonl(opt.corpus_paths[i]);
        std::string sub = opt.corpus_paths.size() == 1 ? out
                                                       : out + "/corpus_" + std::to_string(i);
        profile_outcome res = profile_stage(cfg, corpus, already, !opt.subsequent_quotas, sub);
        fps.push_back(res.profile.fingerprint);
        names.push_back("corpus_" + std::to_string(i));
        if (!merged_written) {
            // the banlist in the run root comes from the first corpus
            if (opt.corpus_paths.size() > 1) {
                save_banlist_json(res.merged, out + "/banlist.json");
            }
            merged_written = true;
            log_info("banlist additions: " + std::to_string(res.added_words) + " words, " +
                     std::to_string(res.added_ngrams) + " n-grams");
        }
    }
    if (fps.size() >= 2) {
        std::ofstream f(out + "/distance_matrix.csv", std::ios::binary);
        f << distance_matrix_csv(names, fps);
    }
    log_info("profile written to " + out);
    return exit_ok;
}

int run_generate(const cli_options& opt) {
    app_config cfg = load_effective_config(opt);
    if (cfg.generation_prompts_path.empty()) {
        throw config_error("generation_prompts_path is required for generate");
    }
    std::vector<prompt_item> prompts = load_prompts_jsonl(cfg.generation_prompts_path);
    std::string out = pick_out_dir(opt, cfg);
    banlist bl = load_banlist_or_config(opt, cfg);
    write_manifest(cfg, out);
    generation_artifacts art = generate_stage(cfg, bl, prompts, out);
    log_info("generated " + std::to_string(art.corpus.size()) + " texts, " +
             std::to_string(art.total_events) + " backtrack events, captures: " +
             std::to_string(art.captures.size()));
    return exit_ok;
}

int run_ftpo(const cli_options& opt) {
    app_config cfg = load_effective_config(opt);
    if (opt.capture_paths.empty()) throw config_error("ftpo: pass at least one --captures");
    std::vector<ftpo_sample> raw;
    for (const auto& path : opt.capture_paths) {
        std::vector<ftpo_sample> part = read_dataset(path);
        raw.insert(raw.end(), part.begin(), part.end());
    }
    std::string out = pick_out_dir(opt, cfg);
    ftpo_outcome res = ftpo_stage(cfg, raw, out);
    log_info("dataset: " + std::to_string(res.kept_samples) + " of " +
             std::to_string(res.raw_samples) + " samples kept");
    return exit_ok;
}

int run_eval(const cli_options& opt) {
    app_config cfg = load_effective_config(opt);
    if (opt.baseline_path.empty() || opt.treated_path.empty()) {
        throw config_error("eval: both --baseline and --treated are required");
    }
    std::vector<corpus_doc> baseline = load_corpus_jsonl(opt.baseline_path);
    std::vector<corpus_doc> treated = load_corpus_jsonl(opt.treated_path);
    if (baseline.empty()) throw data_error("eval: empty corpus: " + opt.baseline_path);
    if (treated.empty()) throw data_error("eval: empty corpus: " + opt.treated_path);
    banlist bl = load_banlist_or_config(opt, cfg);
    std::string out = pick_out_dir(opt, cfg);
    eval_outcome res = eval_stage(cfg, baseline, treated, bl, out);
    log_info("suppression: " + std::to_string(res.suppression.percent) +
             "%, normalized diversity aggregate: " +
             std::to_string(res.aggregate_normalized));
    return exit_ok;
}

int run_full_pipeline(const cli_options& opt) {
    app_config cfg = load_effective_config(opt);
    pipeline_outcome res = run_pipeline(cfg, opt.out_dir);
    log_info("run " + res.run_dir + ": banlist " + std::to_string(res.final_banlist_size) +
             " patterns, dataset " + std::to_string(res.dataset_samples) + " samples" +
             (res.dataset_below_min ? " (below configured minimum)" : "") +
             ", suppression " + std::to_string(res.suppression_percent) + "%");
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"statistical slop profiling, banned-pattern suppression, and FTPO datasets"};
    app.require_subcommand(1);
    // global flags may appear on either side of the subcommand
    app.fallthrough();

    cli_options opt;
    app.add_option("--config", opt.config_path, "YAML config file")->required();
    app.add_option("--seed", opt.seed, "override the config seed")
        ->each([&opt](const std::string&) { opt.seed_set = true; });
    app.add_option("--out", opt.out_dir, "output directory (default: new run dir)");
    app.add_option("--log-level", opt.log_level_name, "debug, info, warn or error");

    CLI::App* c_profile =
        app.add_subcommand("profile", "rank over-used patterns in a corpus, emit a banlist");
    c_profile->add_option("--corpus", opt.corpus_paths, "corpus JSONL, repeatable")
        ->required();
    c_profile->add_option("--banlist", opt.banlist_path, "existing banlist to extend");
    c_profile->add_flag("--subsequent", opt.subsequent_quotas,
                        "use the follow-up iteration quotas");

    CLI::App* c_generate =
        app.add_subcommand("generate", "run the backtracking sampler over the prompt file");
    c_generate->add_option("--banlist", opt.banlist_path, "banlist JSON to enforce");

    CLI::App* c_ftpo = app.add_subcommand(
        "ftpo", "regularize captured preference pairs and score them with the loss");
    c_ftpo->add_option("--captures", opt.capture_paths, "captures JSONL, repeatable")
        ->required();

    CLI::App* c_eval =
        app.add_subcommand("eval", "suppression and diversity, baseline vs treated corpus");
    c_eval->add_option("--baseline", opt.baseline_path, "baseline corpus JSONL")->required();
    c_eval->add_option("--treated", opt.treated_path, "treated corpus JSONL")->required();
    c_eval->add_option("--banlist", opt.banlist_path, "banlist JSON to count");

    CLI::App* c_pipeline = app.add_subcommand(
        "pipeline", "profile, generate, capture and evaluate across iterations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? slopguard::exit_ok : slopguard::exit_user;
    }

    try {
        if (c_profile->parsed()) return run_profile(opt);
        if (c_generate->parsed()) return run_generate(opt);
        if (c_ftpo->parsed()) return run_ftpo(opt);
        if (c_eval->parsed()) return run_eval(opt);
        if (c_pipeline->parsed()) return run_full_pipeline(opt);
        std::cerr << "no subcommand\n";
        return slopguard::exit_user;
    } catch (const slopguard::config_error& e) {
        slopguard::log_error(e.what());
        return slopguard::exit_user;
    } catch (const slopguard::data_error& e) {
        slopguard::log_error(e.what());
        return slopguard::exit_user;
    } catch (const slopguard::transport_error& e) {
        slopguard::log_error(e.what());
        return slopguard::exit_backend;
    } catch (const slopguard::backend_reply_error& e) {
        slopguard::log_error(e.what());
        return slopguard::exit_backend;
    } catch (const std::exception& e) {
        slopguard::log_error(std::string("internal: ") + e.what());
        return slopguard::exit_internal;
    }
}
