#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::eval {

enum class Membership { train, test };

/// Per-sample losses of one class, tagged by split.
struct LossDistribution {
    int class_id = 0;
    std::vector<double> losses;
    std::vector<Membership> membership;

    [[nodiscard]] std::vector<double> of(Membership m) const {
        std::vector<double> out;
        for (std::size_t i = 0; i < losses.size(); ++i) {
            if (membership[i] == m) {
                out.push_back(losses[i]);
            }
        }
        return out;
    }
};

/// P(a random train loss < a random test loss), ties counted as one half.
/// Values above 0.5 mean training samples are recognizably easier.
[[nodiscard]] inline double rank_auc(std::span<const double> train_losses, std::span<const double> test_losses) {
    require(!train_losses.empty() && !test_losses.empty(), "AUC needs both loss sets");
    std::vector<double> test_sorted(test_losses.begin(), test_losses.end());
    std::sort(test_sorted.begin(), test_sorted.end());
    double wins = 0.0;
    for (double t : train_losses) {
        const auto lower = std::lower_bound(test_sorted.begin(), test_sorted.end(), t);
        const auto upper = std::upper_bound(lower, test_sorted.end(), t);
        wins += static_cast<double>(test_sorted.end() - upper) + 0.5 * static_cast<double>(upper - lower);
    }
    return wins / (static_cast<double>(train_losses.size()) * static_cast<double>(test_sorted.size()));
}

[[nodiscard]] inline LossDistribution loss_distribution(const nn::MlpModel& model, const data::LabeledDataset& train,
                                                        const data::LabeledDataset& test, int class_id) {
    const auto train_c = train.of_class(class_id);
    const auto test_c = test.of_class(class_id);
    require(!train_c.empty(), "train split has no samples of class " + std::to_string(class_id));
    require(!test_c.empty(), "test split has no samples of class " + std::to_string(class_id));
    LossDistribution out;
    out.class_id = class_id;
    for (const auto* split : {&train_c, &test_c}) {
        const auto losses = nn::per_sample_losses(model, split->inputs, split->labels);
        out.losses.insert(out.losses.end(), losses.begin(), losses.end());
        out.membership.insert(out.membership.end(), losses.size(),
                              split == &train_c ? Membership::train : Membership::test);
    }
    return out;
}

/// Loss-threshold membership inference AUC for one class.
[[nodiscard]] inline double mia_auc(const nn::MlpModel& model, const data::LabeledDataset& train,
                                    const data::LabeledDataset& test, int class_id) {
    const auto dist = loss_distribution(model, train, test, class_id);
    const auto tr = dist.of(Membership::train);
    const auto te = dist.of(Membership::test);
    return rank_auc(tr, te);
}

}  // namespace mnemo::eval
