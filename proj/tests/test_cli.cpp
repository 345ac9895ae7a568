#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "slopguard/profiler.hpp"

using namespace slopguard;
namespace fs = std::filesystem;

namespace {

struct cli_run {
    int exit_code = -1;
    std::string output;  // stdout and stderr combined
};

cli_run run_tool(const std::string& args) {
    static int counter = 0;
    fs::path log = fs::temp_directory_path() / ("slopguard_cli_log_" +
                                                std::to_string(counter++) + ".txt");
    std::string cmd = std::string(TOOL_PATH) + " " + args + " > " + log.string() + " 2>&1";
    int raw = std::system(cmd.c_str());
    cli_run r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(log);
    std::ostringstream buf;
    buf << in.rdbuf();
    r.output = buf.str();
    fs::remove(log);
    return r;
}

struct temp_dir {
    fs::path path;
    explicit temp_dir(const std::string& tag) {
        path = fs::temp_directory_path() / ("slopguard_cli_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~temp_dir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string fixture_yaml(const std::string& extra = "") {
    std::ostringstream y;
    y << "seed: 42\n";
    y << "num_iterations: 2\n";
    y << "human_profile_path: " << FIXTURE_DIR << "/human_words.tsv\n";
    y << "human_ngram_profile_path: " << FIXTURE_DIR << "/human_ngrams.tsv\n";
    y << "generation_mock_spec_path: " << FIXTURE_DIR << "/mock_story.json\n";
    y << "generation_prompts_path: " << FIXTURE_DIR << "/prompts.jsonl\n";
    y << "generation_max_prompts: 3\n";
    y << "generation_max_new_tokens: 60\n";
    y << "generation_threads: 2\n";
    y << "generation_param_chunk_size: 8\n";
    y << "dict_overrep_initial: 8\n";
    y << "nodict_overrep_initial: 4\n";
    y << "dict_bigrams_initial: 3\n";
    y << "nodict_bigrams_initial: 3\n";
    y << "dict_trigrams_initial: 3\n";
    y << "nodict_trigrams_initial: 3\n";
    y << "ftpo_sample_min_chosen_tokens: 2\n";
    y << extra;
    return y.str();
}

std::string write_file(const temp_dir& dir, const std::string& name,
                       const std::string& content) {
    std::string path = dir.file(name);
    std::ofstream f(path, std::ios::binary);
    f << content;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("bad invocations exit with the user error code") {
    CHECK(run_tool("").exit_code == 1);  // a subcommand is required
    CHECK(run_tool("pipeline").exit_code == 1);  // --config is required
    CHECK(run_tool("frobnicate --config x.yaml").exit_code == 1);

    temp_dir tmp("badcfg");
    cli_run missing = run_tool("pipeline --config " + tmp.file("absent.yaml"));
    CHECK(missing.exit_code == 1);

    std::string bad_key = write_file(tmp, "bad.yaml", "banana_mode: true\n");
    cli_run unknown = run_tool("pipeline --config " + bad_key);
    CHECK(unknown.exit_code == 1);
    CHECK(unknown.output.find("banana_mode") != std::string::npos);
}

TEST_CASE("out-of-scope keys only warn") {
    temp_dir tmp("warnkey");
    std::string cfg = write_file(tmp, "cfg.yaml",
                                 fixture_yaml("manage_vllm: true\nfinetune_epochs: 3\n"));
    temp_dir out("warnkey_out");
    cli_run r = run_tool("pipeline --config " + cfg + " --out " + out.file("run"));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("manage_vllm") != std::string::npos);
    CHECK(r.output.find("finetune_epochs") != std::string::npos);
}

TEST_CASE("the pipeline subcommand writes a complete run") {
    temp_dir tmp("pipe");
    std::string cfg = write_file(tmp, "cfg.yaml", fixture_yaml());
    std::string run_dir = tmp.file("run");
    cli_run r = run_tool("pipeline --config " + cfg + " --out " + run_dir);
    CHECK(r.exit_code == 0);
    for (const char* name : {"manifest.json", "iter_0/corpus.jsonl", "iter_1/corpus.jsonl",
                             "final_banlist.json", "ftpo/dataset.jsonl", "eval/report.json"}) {
        CHECK_MESSAGE(fs::exists(fs::path(run_dir) / name), name);
    }
}

TEST_CASE("seed overrides make reruns reproducible") {
    temp_dir tmp("seeds");
    std::string cfg = write_file(tmp, "cfg.yaml", fixture_yaml());
    std::string a = tmp.file("run_a");
    std::string b = tmp.file("run_b");
    CHECK(run_tool("pipeline --config " + cfg + " --seed 7 --out " + a).exit_code == 0);
    CHECK(run_tool("pipeline --config " + cfg + " --seed 7 --out " + b).exit_code == 0);
    CHECK(slurp(a + "/iter_1/corpus.jsonl") == slurp(b + "/iter_1/corpus.jsonl"));
    CHECK(slurp(a + "/ftpo/dataset.jsonl") == slurp(b + "/ftpo/dataset.jsonl"));

    std::string c = tmp.file("run_c");
    CHECK(run_tool("pipeline --config " + cfg + " --seed 8 --out " + c).exit_code == 0);
    CHECK(slurp(a + "/iter_1/corpus.jsonl") != slurp(c + "/iter_1/corpus.jsonl"));
}

TEST_CASE("generate, ftpo, and eval run standalone against run artifacts") {
    temp_dir tmp("stages");
    std::string cfg = write_file(tmp, "cfg.yaml", fixture_yaml());
    std::string run_dir = tmp.file("run");
    REQUIRE(run_tool("pipeline --config " + cfg + " --out " + run_dir).exit_code == 0);

    std::string gen_dir = tmp.file("gen");
    cli_run gen = run_tool("generate --config " + cfg + " --banlist " + run_dir +
                           "/final_banlist.json --out " + gen_dir);
    CHECK(gen.exit_code == 0);
    CHECK(fs::exists(gen_dir + "/corpus.jsonl"));
    CHECK(fs::exists(gen_dir + "/stats.json"));

    std::string ftpo_dir = tmp.file("ftpo");
    cli_run ftpo = run_tool("ftpo --config " + cfg + " --captures " + run_dir +
                            "/iter_1/captures.jsonl --out " + ftpo_dir);
    CHECK(ftpo.exit_code == 0);
    CHECK(fs::exists(ftpo_dir + "/dataset.jsonl"));
    CHECK(fs::exists(ftpo_dir + "/report.json"));

    std::string eval_dir = tmp.file("eval");
    cli_run ev = run_tool("eval --config " + cfg + " --baseline " + run_dir +
                          "/iter_0/corpus.jsonl --treated " + run_dir +
                          "/iter_1/corpus.jsonl --banlist " + run_dir +
                          "/final_banlist.json --out " + eval_dir);
    CHECK(ev.exit_code == 0);
    CHECK(fs::exists(eval_dir + "/report.json"));
}

TEST_CASE("the profile subcommand compares corpora") {
    temp_dir tmp("profile");
    std::string cfg = write_file(tmp, "cfg.yaml", fixture_yaml());
    save_corpus_jsonl({{"p0", "The tapestry was a testament to the tapestry of care."},
                       {"p1", "A tapestry of the night, a testament to quiet."},
                       {"p2", "The garden tapestry stood as a testament to it."}},
                      tmp.file("corpus_a.jsonl"));
    save_corpus_jsonl({{"p0", "Plain words in the first text without flourish."},
                       {"p1", "More plain words in the second text."},
                       {"p2", "Final plain words in the third text."}},
                      tmp.file("corpus_b.jsonl"));

    std::string out_dir = tmp.file("prof");
    cli_run one = run_tool("profile --config " + cfg + " --corpus " +
                           tmp.file("corpus_a.jsonl") + " --out " + out_dir);
    CHECK(one.exit_code == 0);
    CHECK(fs::exists(out_dir + "/profile.json"));
    CHECK(fs::exists(out_dir + "/banlist.json"));

    std::string two_dir = tmp.file("prof2");
    cli_run two = run_tool("profile --config " + cfg + " --corpus " +
                           tmp.file("corpus_a.jsonl") + " --corpus " +
                           tmp.file("corpus_b.jsonl") + " --out " + two_dir);
    CHECK(two.exit_code == 0);
    CHECK(fs::exists(two_dir + "/corpus_0/profile.json"));
    CHECK(fs::exists(two_dir + "/corpus_1/profile.json"));
    CHECK(fs::exists(two_dir + "/distance_matrix.csv"));
}

TEST_CASE("empty eval corpora are a data problem") {
    temp_dir tmp("evalbad");
    std::string cfg = write_file(tmp, "cfg.yaml", fixture_yaml());
    std::string empty = write_file(tmp, "empty.jsonl", "");
    cli_run r = run_tool("eval --config " + cfg + " --baseline " + empty + " --treated " +
                         empty + " --out " + tmp.file("out"));
    CHECK(r.exit_code == 1);
}

TEST_CASE("unreachable endpoints exit with the backend error code") {
    temp_dir tmp("deadend");
    std::string cfg = write_file(
        tmp, "cfg.yaml",
        fixture_yaml("generation_api_base_url: http://127.0.0.1:9/v1\n"
                     "generation_param_timeout: 1\n"
                     "generation_max_prompts: 1\n"));
    cli_run r = run_tool("generate --config " + cfg + " --out " + tmp.file("out"));
    CHECK(r.exit_code == 2);
}

}
