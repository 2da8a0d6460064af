#pragma once

#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/data/codebook.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::eval {

struct BackdoorPoint {
    double ratio = 0.0;
    double accuracy = 0.0;
};

/// Test accuracy on (1 - r) * x + r * code(trigger_class), labels unchanged.
/// Uses the trigger class's first code.
[[nodiscard]] inline std::vector<BackdoorPoint> backdoor_probe(const nn::MlpModel& model,
                                                               const data::MnemonicCodebook& codebook,
                                                               const data::LabeledDataset& test, int trigger_class,
                                                               const std::vector<double>& ratios) {
    require(!test.empty(), "backdoor probe needs test samples");
    require<ShapeError>(codebook.feature_dim() == test.feature_dim(), "codebook dim differs from test dim");
    const nn::RowVector code = codebook.codes(trigger_class).row(0);
    std::vector<BackdoorPoint> out;
    for (double r : ratios) {
        require(r >= 0.0 && r <= 1.0, "mixing ratio must lie in [0, 1]");
        if (r == 0.0) {
            out.push_back({r, nn::accuracy(model, test.inputs, test.labels)});
            continue;
        }
        nn::Matrix mixed = (1.0 - r) * test.inputs;
        mixed.rowwise() += r * code;
        out.push_back({r, nn::accuracy(model, mixed, test.labels)});
    }
    return out;
}

}  // namespace mnemo::eval
