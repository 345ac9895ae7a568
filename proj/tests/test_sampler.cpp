#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/mock_backend.hpp"
#include "slopguard/sampler.hpp"

using namespace slopguard;

namespace {

std::vector<weighted_token> cands(
    std::initializer_list<std::pair<const char*, double>> init) {
    std::vector<weighted_token> out;
    int id = 0;
    for (const auto& [text, p] : init) out.push_back({text, id++, p});
    return out;
}

mock_model_spec story_spec() {
    mock_model_spec spec;
    spec.vocabulary = {" the", " pond", " lake", " shore", " mist", ".", "<END>"};
    spec.default_dist = {{" the", 0.4}, {" pond", 0.25}, {" lake", 0.15},
                         {" shore", 0.1}, {" mist", 0.05}, {".", 0.05}};
    spec.eos_token = "<END>";
    return spec;
}

sampler_config small_config() {
    sampler_config cfg;
    cfg.chunk_size = 8;
    cfg.max_new_tokens = 60;
    cfg.sampling.min_p = 0.01;
    cfg.sampling.top_k = 0;
    return cfg;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("attenuate follows the powers-of-ten rule") {
    CHECK(attenuate(0.99, 0.2) == doctest::Approx(0.0099).epsilon(1e-12));
    CHECK(attenuate(0.5, 0.0) == 0.5);
    CHECK(attenuate(0.5, 1.0) == doctest::Approx(0.5e-10).epsilon(1e-12));
    CHECK_THROWS_AS(attenuate(0.5, -0.1), config_error);
    CHECK_THROWS_AS(attenuate(0.5, 1.5), config_error);
}

TEST_CASE("resample pipeline matches a step-by-step reference computation") {
    // banned A then: renormalize, min-p, temperature, top-k, top-p
    auto input = cands({{"A", 0.5}, {"B", 0.3}, {"C", 0.15}, {"D", 0.05}});
    sampling_params sp;
    sp.min_p = 0.1;
    sp.temperature = 0.5;
    sp.top_k = 3;
    sp.top_p = 0.9;

    // reference, written out independently of the implementation
    double a = 0.5 * std::pow(10.0, -10.0 * 0.3), b = 0.3, c = 0.15, d = 0.05;
    double z = a + b + c + d;
    a /= z; b /= z; c /= z; d /= z;
    // min_p 0.1: cutoff = 0.1 * b; a falls, d stays
    REQUIRE(a < 0.1 * b);
    REQUIRE(d >= 0.1 * b);
    // temperature 0.5 squares the probabilities
    double b2 = b * b, c2 = c * c, d2 = d * d;
    double z2 = b2 + c2 + d2;
    b2 /= z2; c2 /= z2; d2 /= z2;
    // top_k 3 keeps all three; top_p 0.9: b2 < 0.9, b2+c2 >= 0.9, so D drops
    REQUIRE(b2 < 0.9);
    REQUIRE(b2 + c2 >= 0.9);
    double zb = b2 + c2;

    resample_result rr = resample_distribution(input, "A", 0.3, sp, false);
    CHECK(rr.ladder_stage == 0);
    REQUIRE(rr.survivors.size() == 3);  // post min-p, pre temperature
    CHECK(rr.survivors[0].text == "B");
    CHECK(rr.survivors[1].text == "C");
    CHECK(rr.survivors[2].text == "D");
    REQUIRE(rr.dist.size() == 2);
    CHECK(rr.dist[0].text == "B");
    CHECK(rr.dist[0].prob == doctest::Approx(b2 / zb).epsilon(1e-12));
    CHECK(rr.dist[1].text == "C");
    CHECK(rr.dist[1].prob == doctest::Approx(c2 / zb).epsilon(1e-12));
}

TEST_CASE("a dominant banned token can survive the soft ban") {
    auto input = cands({{"Tapestry", 0.99}, {"Mural", 0.0005}});
    sampling_params sp;
    sp.min_p = 0.1;
    sp.top_k = 0;
    resample_result rr = resample_distribution(input, "Tapestry", 0.2, sp, false);
    REQUIRE(rr.dist.size() == 1);
    CHECK(rr.dist[0].text == "Tapestry");
    CHECK(rr.dist[0].prob == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("force_backtrack walks the relaxation ladder") {
    // strength 0 leaves the banned token dominant; min_p filters the
    // alternative until stage 2 lifts it
    auto input = cands({{"X", 0.999}, {"Y", 0.001}});
    sampling_params sp;
    sp.min_p = 0.3;
    sp.top_k = 0;
    resample_result rr = resample_distribution(input, "X", 0.0, sp, true);
    CHECK(rr.ladder_stage == 2);
    REQUIRE(rr.dist.size() == 1);
    CHECK(rr.dist[0].text == "Y");
    CHECK(rr.dist[0].prob == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("force_backtrack passes the banned token only when it is alone") {
    auto input = cands({{"X", 1.0}});
    sampling_params sp;
    resample_result rr = resample_distribution(input, "X", 1.0, sp, true);
    CHECK(rr.ladder_stage == 4);
    REQUIRE(rr.dist.size() == 1);
    CHECK(rr.dist[0].text == "X");
    CHECK(rr.dist[0].prob == 1.0);
}

TEST_CASE("truncate_to keeps per-position state at the cut point") {
    token_trace tr;
    tr.append({" a", 0}, {});
    tr.append({" b", 1}, {});
    tr.append({" c", 2}, {});
    tr.rejected_counts[1][" x"] = 2;
    tr.rejected_counts[2][" y"] = 1;
    tr.ignored.insert({1, 7});
    tr.ignored.insert({2, 7});

    tr.truncate_to(1);
    CHECK(tr.size() == 1);
    CHECK(tr.text == " a");
    CHECK(tr.rejected_counts.count(1) == 1);   // state at the cut survives
    CHECK(tr.rejected_counts.count(2) == 0);   // state past it goes
    CHECK(tr.ignored.count({1, 7}) == 1);
    CHECK(tr.ignored.count({2, 7}) == 0);
    CHECK_THROWS_AS(tr.truncate_to(5), internal_error);
}

TEST_CASE("hard ban removes the pattern from generated text") {
    mock_backend be(story_spec());
    banlist bl = compile_banlist({"pond"}, {}, {}, {});
    sampler_config cfg = small_config();
    cfg.ban_strength = 1.0;

    generation_result res = generate(be, "By the water.", bl, cfg, 11);
    CHECK(res.text.find("pond") == std::string::npos);
    CHECK(res.stats.backtracks >= 1);
    CHECK(res.stats.tokens_discarded >= res.stats.backtracks);
    for (const auto& ev : res.events) {
        CHECK(ev.rejected.text == " pond");
        CHECK_FALSE(ev.let_through);
    }
}

TEST_CASE("ban strength zero is transparent") {
    mock_backend be(story_spec());
    sampler_config cfg = small_config();

    banlist empty;
    generation_result plain = generate(be, "Evening.", empty, cfg, 23);

    banlist bl = compile_banlist({"pond", "lake"}, {}, {}, {});
    cfg.ban_strength = 0.0;
    generation_result watched = generate(be, "Evening.", bl, cfg, 23);

    CHECK(watched.text == plain.text);
    CHECK(watched.finish == plain.finish);
    CHECK(watched.stats.tokens_kept == plain.stats.tokens_kept);
    CHECK(watched.stats.tokens_discarded == 0);
    CHECK(watched.stats.lets_through == watched.stats.backtracks);
    size_t lets = 0;
    for (const auto& ev : watched.events) {
        CHECK(ev.let_through);
        CHECK(ev.resampled.text == ev.rejected.text);
        lets += 1;
    }
    CHECK(lets == static_cast<size_t>(watched.stats.lets_through));
    // the text still contains the patterns, each logged once
    if (plain.text.find("pond") != std::string::npos) CHECK(lets >= 1);
}

TEST_CASE("identical seeds replay identical generations") {
    mock_backend be(story_spec());
    banlist bl = compile_banlist({"pond"}, {}, {}, {});
    sampler_config cfg = small_config();

    generation_result a = generate(be, "Night air.", bl, cfg, 99);
    generation_result b = generate(be, "Night air.", bl, cfg, 99);
    CHECK(a.text == b.text);
    CHECK(a.events.size() == b.events.size());
    CHECK(a.stats.backtracks == b.stats.backtracks);
    generation_result c = generate(be, "Night air.", bl, cfg, 100);
    // a different seed virtually always lands elsewhere on this spec
    CHECK((c.text != a.text || c.stats.backtracks != a.stats.backtracks));
}

TEST_CASE("client-side stop check cuts before the stop string") {
    mock_model_spec spec;
    spec.vocabulary = {" red", " fish", " stop!", "<END>"};
    spec.default_dist = {{" red", 0.5}, {" fish", 0.3}, {" stop!", 0.2}};
    spec.eos_token = "<END>";
    mock_backend be(spec);

    sampler_config cfg = small_config();
    cfg.stop_sequences = {"stop!"};
    cfg.max_new_tokens = 200;

    generation_result res = generate(be, "go", banlist{}, cfg, 5);
    CHECK(res.finish == finish_reason::stop);
    CHECK(res.text.find("stop!") == std::string::npos);
}

TEST_CASE("max_new_tokens caps the trace") {
    mock_model_spec spec = story_spec();
    spec.eos_token = "";  // never finishes on its own
    mock_backend be(spec);
    sampler_config cfg = small_config();
    cfg.max_new_tokens = 13;
    generation_result res = generate(be, "x", banlist{}, cfg, 3);
    CHECK(res.trace.size() == 13);
    CHECK(res.finish == finish_reason::length);
    CHECK(res.stats.tokens_kept == 13);
}

TEST_CASE("repeated rejections at one position open the freshness valve") {
    // one dominant token A and one alternative B, both banned: rejecting A
    // then B leaves only already-rejected texts, so the draw lets one pass
    mock_model_spec spec;
    spec.vocabulary = {" alpha", " beta", "<END>"};
    spec.default_dist = {{" alpha", 0.7}, {" beta", 0.3}};
    spec.eos_token = "";
    mock_backend be(spec);

    banlist bl = compile_banlist({"alpha", "beta"}, {}, {}, {});
    sampler_config cfg = small_config();
    cfg.ban_strength = 1.0;
    cfg.max_new_tokens = 6;

    generation_result res = generate(be, "q", bl, cfg, 17);
    CHECK(res.trace.size() == 6);
    CHECK(res.stats.lets_through >= 1);
    bool saw_let = false;
    for (const auto& ev : res.events) {
        if (ev.let_through) saw_let = true;
    }
    CHECK(saw_let);
    // ignore marks guarantee progress; every surviving token produced one
    // let-through mark in the end
    CHECK(res.stats.lets_through >= static_cast<int64_t>(res.trace.size()) - 1);
}

TEST_CASE("event serialization carries the pinned fields") {
    backtrack_event ev;
    ev.position = 3;
    ev.rejected = {" pond", 1};
    ev.chosen = {{" lake", 2}, {" shore", std::nullopt}};
    ev.resampled = {" lake", 2};
    ev.pattern = "phrase:pond";
    ev.let_through = false;

    auto j = nlohmann::json::parse(event_to_jsonl(ev));
    CHECK(j["position"] == 3);
    CHECK(j["rejected_token_id"] == 1);
    CHECK(j["rejected_text"] == " pond");
    CHECK(j["chosen_token_ids"][0] == 2);
    CHECK(j["chosen_token_ids"][1].is_null());
    CHECK(j["chosen_texts"][0] == " lake");
    CHECK(j["chosen_texts"][1] == " shore");
    CHECK(j["resampled_token_id"] == 2);
    CHECK(j["pattern"] == "phrase:pond");
    CHECK(j["let_through"] == false);

    generation_stats st;
    st.tokens_kept = 10;
    st.tokens_discarded = 4;
    st.backtracks = 2;
    st.lets_through = 1;
    st.elapsed_ms = 1.5;
    auto sj = nlohmann::json::parse(stats_to_json(st));
    CHECK(sj["tokens_kept"] == 10);
    CHECK(sj["tokens_discarded"] == 4);
    CHECK(sj["backtracks"] == 2);
    CHECK(sj["lets_through"] == 1);
    CHECK(sj["elapsed_ms"] == 1.5);
}

TEST_CASE("trace invariants hold after generation") {
    mock_backend be(story_spec());
    banlist bl = compile_banlist({"pond", "mist"}, {}, {}, {});
    sampler_config cfg = small_config();
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        generation_result res = generate(be, "p" + std::to_string(seed), bl, cfg, seed);
        REQUIRE(res.trace.tokens.size() == res.trace.spans.size());
        REQUIRE(res.trace.tokens.size() == res.trace.candidates.size());
        std::string rebuilt;
        for (size_t i = 0; i < res.trace.size(); ++i) {
            CHECK(res.trace.spans[i].begin == rebuilt.size());
            rebuilt += res.trace.tokens[i].text;
            CHECK(res.trace.spans[i].end == rebuilt.size());
        }
        CHECK(rebuilt == res.text);
        CHECK(res.stats.tokens_kept == static_cast<int64_t>(res.trace.size()));
    }
}

TEST_CASE("generate validates its configuration") {
    mock_backend be(story_spec());
    sampler_config cfg = small_config();
    cfg.ban_strength = 2.0;
    CHECK_THROWS_AS(generate(be, "x", banlist{}, cfg, 1), config_error);
    cfg = small_config();
    cfg.chunk_size = 0;
    CHECK_THROWS_AS(generate(be, "x", banlist{}, cfg, 1), config_error);
    cfg = small_config();
    cfg.max_new_tokens = 0;
    CHECK_THROWS_AS(generate(be, "x", banlist{}, cfg, 1), config_error);
}

}
