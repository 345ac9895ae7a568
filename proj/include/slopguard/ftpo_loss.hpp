#pragma once

// Final-token preference loss over raw logit vectors.
//
// One training instance is a single continuation position: a rejected token
// r, a non-empty set of chosen alternatives C, and the model / reference
// logit vectors y and y_ref.  The total objective is
//
//   pref + lambda_target * target_mse + lambda_nontarget * nontarget_mse
//
// where pref is a margin loss on the gaps y[c] - y[r], tapered to zero as a
// gap approaches the margin, target_mse tethers the tokens in C and {r} to
// the reference outside a dead zone of half-width tau, and nontarget_mse
// pins everything else directly.  Everything here is plain double math, no
// tensor library.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace slopguard {

struct ftpo_params {
    double margin = 2.0;
    double tau_target = 0.5;
    double lambda_target = 0.05;
    double lambda_nontarget = 0.4;
    // taper weights are differentiated through by default; set to treat
    // them as constants during backprop
    bool detach_taper = false;

    void validate() const;  // margin > 0, tau >= 0, lambdas >= 0
};

struct ftpo_instance {
    std::vector<double> y;
    std::vector<double> y_ref;
    int rejected = 0;
    std::vector<int> chosen;

    void validate() const;
    bool is_target(int j) const;
};

struct loss_components {
    double pref = 0.0;
    double target = 0.0;
    double nontarget = 0.0;
    double total = 0.0;
};

double softplus(double x);  // max(x,0) + log1p(exp(-|x|))
double sigmoid(double x);

// value plus the taper weights, one per chosen index in order
double pref_loss(const ftpo_instance& inst, double margin,
                 std::vector<double>* weights_out = nullptr);
double target_mse(const ftpo_instance& inst, double tau_target);
double nontarget_mse(const ftpo_instance& inst);
loss_components total_loss(const ftpo_instance& inst, const ftpo_params& params);

std::vector<double> grad_total(const ftpo_instance& inst, const ftpo_params& params);

// central finite differences on total_loss, the checking oracle for
// grad_total; h is the half step
std::vector<double> grad_fd(const ftpo_instance& inst, const ftpo_params& params,
                            double h = 1e-4);

}  // namespace slopguard
