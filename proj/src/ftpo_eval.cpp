#include "slopguard/ftpo_eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "json.hpp"
#include "slopguard/errors.hpp"
#include "slopguard/rng.hpp"

namespace slopguard {

namespace {

struct partial {
    double loss = 0.0;
    double pref = 0.0;
    double target = 0.0;
    double nontarget = 0.0;
    double d_chosen = 0.0;
    double d_rejected = 0.0;
    double d_other = 0.0;
    size_t wins = 0;
    size_t evaluated = 0;
    size_t skipped = 0;
};

void eval_one(const ftpo_sample& s, const logit_provider& provider, const ftpo_params& params,
              partial& acc) {
    std::optional<provided_logits> got = provider(s);
    if (!got.has_value()) {
        acc.skipped += 1;
        return;
    }

    ftpo_instance inst;
    inst.y = std::move(got->y);
    inst.y_ref = std::move(got->y_ref);
    auto lookup = [&](const std::string& text) -> std::optional<int> {
        auto it = got->token_index.find(text);
        if (it == got->token_index.end()) return std::nullopt;
        if (it->second < 0 || it->second >= static_cast<int>(inst.y.size())) return std::nullopt;
        return it->second;
    };

    std::optional<int> r = lookup(s.rejected.text);
    if (!r.has_value()) {
        acc.skipped += 1;
        return;
    }
    inst.rejected = *r;
    for (const auto& c : s.chosen) {
        std::optional<int> idx = lookup(c.text);
        if (!idx.has_value()) {
            acc.skipped += 1;
            return;
        }
        inst.chosen.push_back(*idx);
    }

    loss_components lc;
    try {
        lc = total_loss(inst, params);
    } catch (const data_error&) {
        acc.skipped += 1;
        return;
    }

    acc.loss += lc.total;
    acc.pref += lc.pref;
    acc.target += lc.target;
    acc.nontarget += lc.nontarget;

    double best_chosen = -1e300;
    double sum_chosen = 0.0;
    for (int c : inst.chosen) {
        size_t j = static_cast<size_t>(c);
        best_chosen = std::max(best_chosen, inst.y[j]);
        sum_chosen += inst.y[j] - inst.y_ref[j];
    }
    if (best_chosen > inst.y[static_cast<size_t>(inst.rejected)]) acc.wins += 1;
    acc.d_chosen += sum_chosen / static_cast<double>(inst.chosen.size());
    acc.d_rejected += inst.y[static_cast<size_t>(inst.rejected)] -
                      inst.y_ref[static_cast<size_t>(inst.rejected)];

    std::vector<char> is_target(inst.y.size(), 0);
    is_target[static_cast<size_t>(inst.rejected)] = 1;
    for (int c : inst.chosen) is_target[static_cast<size_t>(c)] = 1;
    double sum_other = 0.0;
    size_t n_other = 0;
    for (size_t j = 0; j < inst.y.size(); ++j) {
        if (is_target[j]) continue;
        sum_other += inst.y[j] - inst.y_ref[j];
        n_other += 1;
    }
    if (n_other > 0) acc.d_other += sum_other / static_cast<double>(n_other);
    acc.evaluated += 1;
}

}  // namespace

batch_report batch_eval(const std::vector<ftpo_sample>& samples, const logit_provider& provider,
                        const ftpo_params& params, int threads) {
    params.validate();

    // fixed-size blocks reduced in block order, so the float sums come out
    // the same no matter how many workers ran
    constexpr size_t block = 64;
    size_t nblocks = (samples.size() + block - 1) / block;
    std::vector<partial> partials(nblocks);

    int nthreads = threads;
    if (nthreads <= 0) {
        unsigned hw = std::thread::hardware_concurrency();
        nthreads = static_cast<int>(std::clamp(hw, 1u, 8u));
    }
    nthreads = std::min(nthreads, static_cast<int>(std::max<size_t>(nblocks, 1)));

    auto work = [&](size_t worker) {
        for (size_t b = worker; b < nblocks; b += static_cast<size_t>(nthreads)) {
            size_t lo = b * block;
            size_t hi = std::min(lo + block, samples.size());
            for (size_t i = lo; i < hi; ++i) {
                eval_one(samples[i], provider, params, partials[b]);
            }
        }
    };
    if (nthreads <= 1 || nblocks <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nthreads; ++w) pool.emplace_back(work, static_cast<size_t>(w));
        for (auto& t : pool) t.join();
    }

    partial sum;
    for (const auto& p : partials) {
        sum.loss += p.loss;
        sum.pref += p.pref;
        sum.target += p.target;
        sum.nontarget += p.nontarget;
        sum.d_chosen += p.d_chosen;
        sum.d_rejected += p.d_rejected;
        sum.d_other += p.d_other;
        sum.wins += p.wins;
        sum.evaluated += p.evaluated;
        sum.skipped += p.skipped;
    }

    batch_report r;
    r.evaluated = sum.evaluated;
    r.skipped = sum.skipped;
    if (sum.evaluated > 0) {
        double n = static_cast<double>(sum.evaluated);
        r.mean_loss = sum.loss / n;
        r.mean_pref = sum.pref / n;
        r.mean_target = sum.target / n;
        r.mean_nontarget = sum.nontarget / n;
        r.pref_accuracy = static_cast<double>(sum.wins) / n;
        r.delta_chosen = sum.d_chosen / n;
        r.delta_rejected = sum.d_rejected / n;
        r.delta_other = sum.d_other / n;
    }
    return r;
}

logit_provider make_mock_logit_provider(uint64_t seed, int vocab_pad) {
    if (vocab_pad < 1) vocab_pad = 1;
    uint64_t base = derive_seed(seed, stream_mock_logit);
    return [base, vocab_pad](const ftpo_sample& s) -> std::optional<provided_logits> {
        std::string key = s.rejected.text;
        for (const auto& c : s.chosen) {
            key += '\x1f';
            key += c.text;
        }
        key += '\x1f';
        key += s.prompt_text;
        std::mt19937_64 rng(derive_seed(base, hash_bytes(key)));

        provided_logits out;
        out.token_index[s.rejected.text] = 0;
        int next = 1;
        for (const auto& c : s.chosen) {
            if (out.token_index.emplace(c.text, next).second) next += 1;
        }
        size_t v = static_cast<size_t>(next + vocab_pad);
        out.y_ref.resize(v);
        out.y.resize(v);
        for (size_t j = 0; j < v; ++j) {
            out.y_ref[j] = next_uniform(rng) * 8.0 - 4.0;
            out.y[j] = out.y_ref[j] + next_uniform(rng) * 3.0 - 1.5;
        }
        return out;
    };
}

std::string report_to_json(const batch_report& r) {
    nlohmann::ordered_json j;
    j["mean_loss"] = r.mean_loss;
    nlohmann::ordered_json comp;
    comp["pref"] = r.mean_pref;
    comp["target"] = r.mean_target;
    comp["nontarget"] = r.mean_nontarget;
    j["components"] = std::move(comp);
    j["pref_accuracy"] = r.pref_accuracy;
    j["delta_chosen"] = r.delta_chosen;
    j["delta_rejected"] = r.delta_rejected;
    j["delta_other"] = r.delta_other;
    j["evaluated"] = r.evaluated;
    j["skipped"] = r.skipped;
    return j.dump(2);
}

}  // namespace slopguard
