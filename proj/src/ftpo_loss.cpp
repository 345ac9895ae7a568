#include "slopguard/ftpo_loss.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "slopguard/errors.hpp"

namespace slopguard {

void ftpo_params::validate() const {
    if (!(margin > 0.0)) throw config_error("ftpo: margin must be > 0");
    if (!(tau_target >= 0.0)) throw config_error("ftpo: tau_target must be >= 0");
    if (!(lambda_target >= 0.0) || !(lambda_nontarget >= 0.0)) {
        throw config_error("ftpo: lambda weights must be >= 0");
    }
}

void ftpo_instance::validate() const {
    const int v = static_cast<int>(y.size());
    if (y.size() != y_ref.size()) throw data_error("ftpo: y and y_ref differ in length");
    if (chosen.empty()) throw data_error("ftpo: chosen set is empty");
    if (rejected < 0 || rejected >= v) throw data_error("ftpo: rejected index out of range");
    std::set<int> seen;
    for (int c : chosen) {
        if (c < 0 || c >= v) throw data_error("ftpo: chosen index out of range");
        if (c == rejected) throw data_error("ftpo: rejected index appears in chosen");
        if (!seen.insert(c).second) throw data_error("ftpo: duplicate chosen index");
    }
    if (v < static_cast<int>(chosen.size()) + 2) {
        throw data_error("ftpo: vocabulary too small for the target set");
    }
}

bool ftpo_instance::is_target(int j) const {
    if (j == rejected) return true;
    return std::find(chosen.begin(), chosen.end(), j) != chosen.end();
}

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

double pref_loss(const ftpo_instance& inst, double margin, std::vector<double>* weights_out) {
    double num = 0.0;
    double den = 0.0;
    if (weights_out) weights_out->clear();
    for (int c : inst.chosen) {
        double delta = inst.y[static_cast<size_t>(c)] - inst.y[static_cast<size_t>(inst.rejected)];
        double w = std::clamp((margin - delta) / margin, 0.0, 1.0);
        if (weights_out) weights_out->push_back(w);
        num += w * softplus(margin - delta);
        den += w;
    }
    if (den == 0.0) return 0.0;  // every chosen token already wins by the margin
    return num / den;
}

double target_mse(const ftpo_instance& inst, double tau_target) {
    double sum = 0.0;
    size_t n = inst.chosen.size() + 1;
    auto excess = [&](int j) {
        double d = std::abs(inst.y[static_cast<size_t>(j)] - inst.y_ref[static_cast<size_t>(j)]);
        double e = std::max(d - tau_target, 0.0);
        return e * e;
    };
    sum += excess(inst.rejected);
    for (int c : inst.chosen) sum += excess(c);
    return sum / static_cast<double>(n);
}

double nontarget_mse(const ftpo_instance& inst) {
    std::vector<char> target(inst.y.size(), 0);
    target[static_cast<size_t>(inst.rejected)] = 1;
    for (int c : inst.chosen) target[static_cast<size_t>(c)] = 1;
    double sum = 0.0;
    size_t n = 0;
    for (size_t j = 0; j < inst.y.size(); ++j) {
        if (target[j]) continue;
        double d = inst.y[j] - inst.y_ref[j];
        sum += d * d;
        n += 1;
    }
    if (n == 0) return 0.0;
    return sum / static_cast<double>(n);
}

loss_components total_loss(const ftpo_instance& inst, const ftpo_params& params) {
    params.validate();
    inst.validate();
    loss_components out;
    out.pref = pref_loss(inst, params.margin);
    out.target = target_mse(inst, params.tau_target);
    out.nontarget = nontarget_mse(inst);
    out.total =
        out.pref + params.lambda_target * out.target + params.lambda_nontarget * out.nontarget;
    return out;
}

std::vector<double> grad_total(const ftpo_instance& inst, const ftpo_params& params) {
    params.validate();
    inst.validate();
    const size_t v = inst.y.size();
    const double m = params.margin;
    std::vector<double> g(v, 0.0);

    // preference term: L = num / den over the chosen gaps
    double num = 0.0;
    double den = 0.0;
    std::vector<double> deltas(inst.chosen.size());
    std::vector<double> ws(inst.chosen.size());
    for (size_t i = 0; i < inst.chosen.size(); ++i) {
        double delta = inst.y[static_cast<size_t>(inst.chosen[i])] -
                       inst.y[static_cast<size_t>(inst.rejected)];
        deltas[i] = delta;
        double w = std::clamp((m - delta) / m, 0.0, 1.0);
        ws[i] = w;
        num += w * softplus(m - delta);
        den += w;
    }
    if (den > 0.0) {
        for (size_t i = 0; i < inst.chosen.size(); ++i) {
            double delta = deltas[i];
            double w = ws[i];
            double sp = softplus(m - delta);
            double dsp = -sigmoid(m - delta);  // d softplus(m - delta) / d delta
            double dw = 0.0;                   // d w / d delta, zero outside the open ramp
            if (!params.detach_taper && delta > 0.0 && delta < m) dw = -1.0 / m;
            // quotient rule on num/den with num' = dw*sp + w*dsp, den' = dw
            double dnum = dw * sp + w * dsp;
            double dpref = (dnum * den - num * dw) / (den * den);
            g[static_cast<size_t>(inst.chosen[i])] += dpref;
            g[static_cast<size_t>(inst.rejected)] -= dpref;
        }
    }

    // target tether with dead zone
    const double lt = params.lambda_target;
    const size_t tcount = inst.chosen.size() + 1;
    auto add_target = [&](int j) {
        double d = inst.y[static_cast<size_t>(j)] - inst.y_ref[static_cast<size_t>(j)];
        double a = std::abs(d);
        if (a <= params.tau_target) return;
        double s = d > 0.0 ? 1.0 : -1.0;
        g[static_cast<size_t>(j)] +=
            lt * 2.0 * (a - params.tau_target) * s / static_cast<double>(tcount);
    };
    add_target(inst.rejected);
    for (int c : inst.chosen) add_target(c);

    // non-target anchor
    std::vector<char> target(v, 0);
    target[static_cast<size_t>(inst.rejected)] = 1;
    for (int c : inst.chosen) target[static_cast<size_t>(c)] = 1;
    size_t ncount = 0;
    for (size_t j = 0; j < v; ++j) {
        if (!target[j]) ncount += 1;
    }
    if (ncount > 0) {
        const double scale = params.lambda_nontarget * 2.0 / static_cast<double>(ncount);
        for (size_t j = 0; j < v; ++j) {
            if (target[j]) continue;
            g[j] += scale * (inst.y[j] - inst.y_ref[j]);
        }
    }
    return g;
}

std::vector<double> grad_fd(const ftpo_instance& inst, const ftpo_params& params, double h) {
    std::vector<double> g(inst.y.size(), 0.0);
    ftpo_instance probe = inst;
    for (size_t j = 0; j < inst.y.size(); ++j) {
        probe.y[j] = inst.y[j] + h;
        double up = total_loss(probe, params).total;
        probe.y[j] = inst.y[j] - h;
        double down = total_loss(probe, params).total;
        probe.y[j] = inst.y[j];
        g[j] = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace slopguard
