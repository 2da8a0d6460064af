#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/data/codebook.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::eval {

struct LayerGradientMagnitude {
    std::string layer;
    double full = 0.0;    // mean |dL/dw| of the mixed training loss
    double forget = 0.0;  // same, restricted to forgetting classes
    double remain = 0.0;  // same, restricted to remaining classes
    double forget_ratio = 0.0;
    double remain_ratio = 0.0;
};

namespace detail {

/// Gradient of t * E[loss(code of y)] + (1 - t) * E[loss(x)] over the samples
/// of `classes`: every sample contributes its own loss with weight 1 - t and
/// its class code's loss with weight t.
inline nn::GradientVector mixed_gradient(const nn::MlpModel& model, const data::LabeledDataset& dataset,
                                         const data::MnemonicCodebook& codebook, const std::vector<int>& classes,
                                         double t_mix) {
    const auto subset = dataset.restricted_to(classes);
    require(!subset.empty(), "no samples for the requested classes");
    nn::GradientVector grad(model.params().layout());
    auto g = grad.values();
    if (t_mix < 1.0) {
        const auto data_part = nn::loss_and_grad_chunked(model, subset.inputs, subset.labels);
        const auto src = data_part.grad.values();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += (1.0 - t_mix) * src[i];
        }
    }
    if (t_mix > 0.0) {
        const auto n = static_cast<double>(subset.size());
        for (int c : classes) {
            const auto count = static_cast<double>(subset.count_of(c));
            if (count == 0.0) {
                continue;
            }
            const auto& codes = codebook.codes(c);
            const std::vector<int> labels(static_cast<std::size_t>(codes.rows()), c);
            const auto code_part = nn::loss_and_grad(model, codes, labels);
            const auto src = code_part.grad.values();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += t_mix * (count / n) * src[i];
            }
        }
    }
    return grad;
}

inline double mean_abs(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += std::abs(x);
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace detail

/// Per-tensor gradient magnitudes at the trained weights for the full,
/// forgetting-class and remaining-class losses under the training mixture.
[[nodiscard]] inline std::vector<LayerGradientMagnitude> laplace_diagnostic(const nn::MlpModel& model,
                                                                            const data::LabeledDataset& dataset,
                                                                            const data::MnemonicCodebook& codebook,
                                                                            const data::ClassPartition& partition,
                                                                            double t_mix) {
    require(t_mix >= 0.0 && t_mix <= 1.0, "t_mix must lie in [0, 1]");
    std::vector<int> all;
    for (int c = 0; c < static_cast<int>(partition.num_classes()); ++c) {
        if (dataset.count_of(c) > 0) {
            all.push_back(c);
        }
    }
    std::vector<int> forget, remain;
    for (int c : all) {
        (partition.forgets(c) ? forget : remain).push_back(c);
    }
    require(!forget.empty(), "dataset has no samples of the forgetting classes");

    const auto full = detail::mixed_gradient(model, dataset, codebook, all, t_mix);
    const auto g_forget = detail::mixed_gradient(model, dataset, codebook, forget, t_mix);
    const auto g_remain = remain.empty() ? nn::GradientVector(model.params().layout())
                                         : detail::mixed_gradient(model, dataset, codebook, remain, t_mix);

    std::vector<LayerGradientMagnitude> out;
    for (std::size_t l = 0; l < full.layout().size(); ++l) {
        LayerGradientMagnitude m;
        m.layer = full.layout()[l].name;
        m.full = detail::mean_abs(full.segment(l));
        m.forget = detail::mean_abs(g_forget.segment(l));
        m.remain = detail::mean_abs(g_remain.segment(l));
        m.forget_ratio = m.full > 0.0 ? m.forget / m.full : 0.0;
        m.remain_ratio = m.full > 0.0 ? m.remain / m.full : 0.0;
        out.push_back(m);
    }
    return out;
}

}  // namespace mnemo::eval
