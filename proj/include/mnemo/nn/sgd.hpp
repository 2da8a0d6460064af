#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "mnemo/core/error.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::nn {

struct LrSchedule {
    enum class Kind { constant, cosine };
    Kind kind = Kind::constant;
    std::size_t total_steps = 0;  // cosine only

    static LrSchedule constant() { return {}; }
    static LrSchedule cosine(std::size_t total_steps) { return {Kind::cosine, total_steps}; }
};

struct SgdConfig {
    double learning_rate = 0.01;
    double weight_decay = 5e-4;
    LrSchedule schedule;

    void validate() const {
        require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
        require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay must be nonnegative");
        require(schedule.kind != LrSchedule::Kind::cosine || schedule.total_steps > 0,
                "cosine schedule needs total_steps > 0");
    }

    /// Rate used at `step`; cosine decays to 0 at total_steps and stays there.
    [[nodiscard]] double rate_at(std::size_t step) const {
        if (schedule.kind == LrSchedule::Kind::constant) {
            return learning_rate;
        }
        const double progress =
            static_cast<double>(std::min(step, schedule.total_steps)) / static_cast<double>(schedule.total_steps);
        return std::max(0.0, 0.5 * learning_rate * (1.0 + std::cos(std::numbers::pi * progress)));
    }
};

/// w <- w - lr_t * (grad + weight_decay * w). Leaves the model untouched on error.
inline void sgd_step(MlpModel& model, const GradientVector& grad, const SgdConfig& config, std::size_t step) {
    require_aligned(grad, model.params(), "sgd_step");
    require<NonFiniteError>(grad.all_finite(), "gradient contains non-finite values");
    const double lr = config.rate_at(step);
    auto w = model.mutable_params().values();
    const auto g = grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= lr * (g[i] + config.weight_decay * w[i]);
    }
}

}  // namespace mnemo::nn
