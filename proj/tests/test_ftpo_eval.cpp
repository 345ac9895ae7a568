#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "slopguard/ftpo_eval.hpp"

using namespace slopguard;

namespace {

ftpo_sample sample_with(const std::string& rejected, const std::vector<std::string>& chosen,
                        const std::string& prompt) {
    ftpo_sample s;
    s.prompt_text = prompt;
    s.rejected = {rejected, std::nullopt};
    for (const auto& c : chosen) s.chosen.push_back({c, std::nullopt});
    s.source = {"phrase:t", "g", 1};
    return s;
}

// fixed logits: rejected at index 0, chosen after, two filler tokens
logit_provider fixed_provider(double rejected_logit, double chosen_logit) {
    return [=](const ftpo_sample& s) -> std::optional<provided_logits> {
        provided_logits p;
        size_t v = 1 + s.chosen.size() + 2;
        p.y.assign(v, 0.0);
        p.y_ref.assign(v, 0.0);
        p.token_index[s.rejected.text] = 0;
        p.y[0] = rejected_logit;
        for (size_t i = 0; i < s.chosen.size(); ++i) {
            p.token_index[s.chosen[i].text] = static_cast<int>(i + 1);
            p.y[i + 1] = chosen_logit;
        }
        return p;
    };
}

}  // namespace

TEST_SUITE("ftpo_eval") {

TEST_CASE("batch metrics on hand-built logits") {
    std::vector<ftpo_sample> ds;
    ds.push_back(sample_with(" a", {" b", " c"}, "p1"));
    ds.push_back(sample_with(" d", {" e", " f"}, "p2"));

    ftpo_params params;
    // chosen sit 3 above rejected at -1: pref weights 0, accuracy 1
    batch_report r = batch_eval(ds, fixed_provider(-1.0, 2.0), params, 1);
    CHECK(r.evaluated == 2);
    CHECK(r.skipped == 0);
    CHECK(r.pref_accuracy == 1.0);
    CHECK(r.mean_pref == 0.0);
    // deltas vs the zero reference: rejected -1, chosen +2, others 0
    CHECK(r.delta_rejected == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(r.delta_chosen == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.delta_other == doctest::Approx(0.0).epsilon(1e-12));
    // target mse: mean over {r} + C of (|d|-tau)^2 outside the zone
    double t = ((1.0 - 0.5) * (1.0 - 0.5) + 2 * (2.0 - 0.5) * (2.0 - 0.5)) / 3.0;
    CHECK(r.mean_target == doctest::Approx(t).epsilon(1e-12));
    CHECK(r.mean_loss == doctest::Approx(params.lambda_target * t).epsilon(1e-12));

    // rejected above every chosen: accuracy 0
    batch_report r2 = batch_eval(ds, fixed_provider(2.0, 1.0), params, 1);
    CHECK(r2.pref_accuracy == 0.0);
    CHECK(r2.mean_pref > 0.0);
}

TEST_CASE("samples the provider cannot serve are counted as skipped") {
    std::vector<ftpo_sample> ds;
    ds.push_back(sample_with(" a", {" b", " c"}, "p1"));
    ds.push_back(sample_with(" skip", {" b", " c"}, "p2"));
    auto provider = [&](const ftpo_sample& s) -> std::optional<provided_logits> {
        if (s.rejected.text == " skip") return std::nullopt;
        return fixed_provider(-1.0, 2.0)(s);
    };
    batch_report r = batch_eval(ds, provider, ftpo_params{}, 1);
    CHECK(r.evaluated == 1);
    CHECK(r.skipped == 1);
}

TEST_CASE("a provider missing a chosen token in its index skips the sample") {
    std::vector<ftpo_sample> ds;
    ds.push_back(sample_with(" a", {" b", " c"}, "p1"));
    auto provider = [](const ftpo_sample& s) -> std::optional<provided_logits> {
        provided_logits p;
        p.y.assign(4, 0.0);
        p.y_ref.assign(4, 0.0);
        p.token_index[s.rejected.text] = 0;
        // chosen tokens left unresolved on purpose
        return p;
    };
    batch_report r = batch_eval(ds, provider, ftpo_params{}, 1);
    CHECK(r.evaluated == 0);
    CHECK(r.skipped == 1);
}

TEST_CASE("results are independent of the thread count") {
    std::vector<ftpo_sample> ds;
    for (int i = 0; i < 333; ++i) {
        ds.push_back(sample_with(" r" + std::to_string(i % 7),
                                 {" c" + std::to_string(i % 5), " d", " e"},
                                 "p" + std::to_string(i)));
    }
    auto provider = make_mock_logit_provider(2024);
    ftpo_params params;
    batch_report one = batch_eval(ds, provider, params, 1);
    batch_report four = batch_eval(ds, provider, params, 4);
    batch_report dflt = batch_eval(ds, provider, params, 0);
    CHECK(one.mean_loss == four.mean_loss);
    CHECK(one.mean_pref == four.mean_pref);
    CHECK(one.pref_accuracy == four.pref_accuracy);
    CHECK(one.delta_chosen == four.delta_chosen);
    CHECK(one.mean_loss == dflt.mean_loss);
    CHECK(one.evaluated + one.skipped == ds.size());
}

TEST_CASE("the mock provider is a pure function of seed and sample") {
    ftpo_sample s = sample_with(" x", {" y", " z"}, "prompt");
    auto p1 = make_mock_logit_provider(7);
    auto p2 = make_mock_logit_provider(7);
    auto a = p1(s);
    auto b = p2(s);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->y == b->y);
    CHECK(a->y_ref == b->y_ref);

    auto c = make_mock_logit_provider(8)(s);
    REQUIRE(c.has_value());
    CHECK(a->y != c->y);

    // distinct samples get distinct logits
    auto d = p1(sample_with(" x", {" y", " z"}, "other prompt"));
    REQUIRE(d.has_value());
    CHECK(a->y != d->y);
}

TEST_CASE("report serialization carries the summary fields") {
    std::vector<ftpo_sample> ds = {sample_with(" a", {" b", " c"}, "p")};
    batch_report r = batch_eval(ds, fixed_provider(-1.0, 2.0), ftpo_params{}, 1);
    auto j = nlohmann::json::parse(report_to_json(r));
    CHECK(j["evaluated"] == 1);
    CHECK(j["skipped"] == 0);
    CHECK(j["pref_accuracy"] == 1.0);
    CHECK(j.contains("components"));
    CHECK(j["components"].contains("pref"));
    CHECK(j.contains("delta_chosen"));
    CHECK(j.contains("delta_rejected"));
    CHECK(j.contains("delta_other"));
}

TEST_CASE("empty dataset reports zeros without dividing by zero") {
    batch_report r = batch_eval({}, make_mock_logit_provider(1), ftpo_params{}, 2);
    CHECK(r.evaluated == 0);
    CHECK(r.skipped == 0);
    CHECK(r.mean_loss == 0.0);
    CHECK(std::isfinite(r.pref_accuracy));
}

}
