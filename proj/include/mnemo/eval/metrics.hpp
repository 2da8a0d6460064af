#pragma once

#include <string>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::eval {

using data::ClassPartition;
using data::LabeledDataset;
using nn::MlpModel;

/// Forgetting capability on a test split. e_f = 100 - a_f by construction.
struct EvalReport {
    double a_r = 0.0;
    double a_f = 0.0;
    double e_f = 0.0;
    double forget_time = 0.0;  // seconds; 0 when no forgetting happened
    std::size_t backprop_count = 0;
    std::string dataset;
    std::string method;
    std::vector<int> forget_classes;
};

[[nodiscard]] inline EvalReport forgetting_capability(const MlpModel& model, const LabeledDataset& test,
                                                      const ClassPartition& partition) {
    require<ShapeError>(model.num_classes() == partition.num_classes(), "partition class count differs from model");
    const auto predicted = nn::predict(model, test.inputs);
    std::size_t remain_total = 0, remain_hit = 0, forget_total = 0, forget_hit = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool hit = predicted[i] == test.labels[i];
        if (partition.forgets(test.labels[i])) {
            ++forget_total;
            forget_hit += hit ? 1 : 0;
        } else {
            ++remain_total;
            remain_hit += hit ? 1 : 0;
        }
    }
    require(remain_total > 0, "test set has no samples of the remaining classes");
    require(forget_total > 0, "test set has no samples of the forgetting classes");
    EvalReport report;
    report.a_r = 100.0 * static_cast<double>(remain_hit) / static_cast<double>(remain_total);
    report.a_f = 100.0 * static_cast<double>(forget_hit) / static_cast<double>(forget_total);
    report.e_f = 100.0 - report.a_f;
    report.forget_classes = partition.forget();
    return report;
}

struct ClassOutputCheck {
    bool never = true;
    std::size_t count = 0;  // inputs whose argmax is the class
    std::size_t total = 0;
};

/// Whether the model's argmax never lands on `class_id` over the whole set.
[[nodiscard]] inline ClassOutputCheck never_outputs_class(const MlpModel& model, const LabeledDataset& test,
                                                          int class_id) {
    require(!test.empty(), "never_outputs_class needs a nonempty set");
    const auto predicted = nn::predict(model, test.inputs);
    ClassOutputCheck out;
    out.total = predicted.size();
    for (int p : predicted) {
        out.count += p == class_id ? 1 : 0;
    }
    out.never = out.count == 0;
    return out;
}

}  // namespace mnemo::eval
