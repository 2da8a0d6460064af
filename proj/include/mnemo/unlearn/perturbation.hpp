#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/nn/parameters.hpp"
#include "mnemo/unlearn/fisher.hpp"

namespace mnemo::unlearn {

struct AmplitudeTag {};
using AmplitudeVector = nn::SegmentedVector<AmplitudeTag>;

inline constexpr double kDefaultEpsilon = 1e-12;

/// eta_i = f_forget,i / (f_remain,i + epsilon).
[[nodiscard]] inline AmplitudeVector compute_eta(const FimDiagonal& forget, const FimDiagonal& remain,
                                                 double epsilon = kDefaultEpsilon) {
    nn::require_aligned(forget.values, remain.values, "compute_eta");
    require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
    AmplitudeVector eta(forget.values.layout());
    const auto f = forget.values.values();
    const auto r = remain.values.values();
    auto out = eta.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        require(f[i] >= 0.0 && r[i] >= 0.0, "Fisher entries must be nonnegative");
        out[i] = f[i] / (r[i] + epsilon);
    }
    require<NonFiniteError>(eta.all_finite(), "perturbation amplitude overflowed; raise epsilon");
    return eta;
}

struct LayerAlpha {
    std::string layer;
    double alpha = 0.0;
    double max_eta = 0.0;
};

/// Per tensor: alpha = min(lambda1, lambda2 / max eta), and lambda1 when max eta is 0.
[[nodiscard]] inline std::vector<LayerAlpha> compute_alpha(const AmplitudeVector& eta, double lambda1, double lambda2) {
    require(lambda1 > 0.0 && lambda2 > 0.0, "lambda1 and lambda2 must be positive");
    std::vector<LayerAlpha> out;
    for (std::size_t l = 0; l < eta.layout().size(); ++l) {
        const auto seg = eta.segment(l);
        const double max_eta = seg.empty() ? 0.0 : *std::max_element(seg.begin(), seg.end());
        const double alpha = max_eta > 0.0 ? std::min(lambda1, lambda2 / max_eta) : lambda1;
        out.push_back({eta.layout()[l].name, alpha, max_eta});
    }
    return out;
}

/// Signed one-shot perturbation w +/- alpha_l * eta_i.
struct PerturbationPlan {
    AmplitudeVector eta;
    std::vector<LayerAlpha> alpha;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double epsilon = kDefaultEpsilon;

    [[nodiscard]] double step(std::size_t i, std::size_t layer) const { return alpha[layer].alpha * eta[i]; }
};

[[nodiscard]] inline PerturbationPlan make_plan(const FimDiagonal& forget, const FimDiagonal& remain, double lambda1,
                                                double lambda2, double epsilon = kDefaultEpsilon) {
    PerturbationPlan plan;
    plan.eta = compute_eta(forget, remain, epsilon);
    plan.alpha = compute_alpha(plan.eta, lambda1, lambda2);
    plan.lambda1 = lambda1;
    plan.lambda2 = lambda2;
    plan.epsilon = epsilon;
    return plan;
}

/// Both candidates w + d and w - d, built so that their floating-point mean is
/// exactly w whenever the step is no larger than |w| (or w is zero). `inexact`
/// counts the parameters where no such pair exists in double precision.
struct PerturbedPair {
    nn::ParameterVector plus;
    nn::ParameterVector minus;
    std::size_t inexact = 0;
};

[[nodiscard]] inline PerturbedPair apply_plan(const nn::ParameterVector& w, const PerturbationPlan& plan) {
    nn::require_aligned(w, plan.eta, "apply_plan");
    PerturbedPair out{w, w, 0};
    for (std::size_t l = 0; l < w.layout().size(); ++l) {
        const auto& seg = w.layout()[l];
        for (std::size_t i = seg.offset; i < seg.offset + seg.length; ++i) {
            const double x = w[i];
            const double step = plan.step(i, l);
            // Move away from zero first: that side is never finer-grained than x,
            // so the mirrored value 2x - away is representable.
            const double away = std::signbit(x) ? x - step : x + step;
            const double d = away - x;
            const double toward = x - d;
            double plus = std::signbit(x) ? toward : away;
            double minus = std::signbit(x) ? away : toward;
            if ((plus + minus) / 2.0 != x) {
                plus = x + step;
                minus = x - step;
                ++out.inexact;
            }
            out.plus[i] = plus;
            out.minus[i] = minus;
        }
    }
    return out;
}

/// Adds sign * alpha * eta to every parameter (a single candidate).
[[nodiscard]] inline nn::ParameterVector apply_plan(const nn::ParameterVector& w, const PerturbationPlan& plan, int sign) {
    require(sign == 1 || sign == -1, "sign must be +1 or -1");
    auto pair = apply_plan(w, plan);
    return sign > 0 ? std::move(pair.plus) : std::move(pair.minus);
}

}  // namespace mnemo::unlearn
