#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/data/codebook.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::unlearn {

using data::LabeledDataset;
using data::MnemonicCodebook;
using nn::MlpModel;

struct FisherTag {};
using FisherVector = nn::SegmentedVector<FisherTag>;

/// Where the samples behind a Fisher diagonal came from. `oracle` means the
/// entire training split of the class set.
enum class FimSource { mnemonic, data, oracle };

inline const char* to_string(FimSource s) {
    switch (s) {
        case FimSource::mnemonic: return "mnemonic";
        case FimSource::data: return "data";
        case FimSource::oracle: return "oracle";
    }
    return "?";
}

/// Empirical Fisher diagonal: per-class mean of squared per-sample loss
/// gradients, averaged over the class set.
struct FimDiagonal {
    FisherVector values;
    std::vector<int> class_set;
    FimSource source = FimSource::data;
    std::size_t backprop_count = 0;  // per-sample backward passes spent
};

inline constexpr std::size_t kFisherChunk = 2048;

/// Pre: every sample's label is in `class_set`, and each class has a sample.
[[nodiscard]] inline FimDiagonal estimate_fim_diagonal(const MlpModel& model, const LabeledDataset& samples,
                                                       std::vector<int> class_set,
                                                       FimSource source = FimSource::data) {
    require(!samples.empty(), "Fisher estimation needs samples");
    require(!class_set.empty(), "Fisher estimation needs a class set");
    std::sort(class_set.begin(), class_set.end());
    class_set.erase(std::unique(class_set.begin(), class_set.end()), class_set.end());
    for (int y : samples.labels) {
        require(std::binary_search(class_set.begin(), class_set.end(), y),
                "sample label " + std::to_string(y) + " is not in the class set");
    }

    FimDiagonal out{FisherVector(model.params().layout()), class_set, source, 0};
    nn::GradientVector class_sum(model.params().layout());
    for (int c : class_set) {
        const auto rows = samples.indices_of(c);
        require(!rows.empty(), "class " + std::to_string(c) + " has no samples for Fisher estimation");
        std::fill(class_sum.values().begin(), class_sum.values().end(), 0.0);
        for (std::size_t begin = 0; begin < rows.size(); begin += kFisherChunk) {
            const std::size_t end = std::min(rows.size(), begin + kFisherChunk);
            const auto chunk = samples.subset(std::span(rows).subspan(begin, end - begin));
            nn::accumulate_squared_gradients(model, chunk.inputs, chunk.labels, class_sum);
        }
        const double weight = 1.0 / (static_cast<double>(rows.size()) * static_cast<double>(class_set.size()));
        auto dst = out.values.values();
        const auto src = class_sum.values();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += src[i] * weight;
        }
        out.backprop_count += rows.size();
    }
    return out;
}

/// Fisher diagonal from the codes of `class_set`, one backward pass per code.
[[nodiscard]] inline FimDiagonal fim_from_codebook(const MlpModel& model, const MnemonicCodebook& codebook,
                                                   const std::vector<int>& class_set) {
    for (int c : class_set) {
        require(codebook.covers(c), "codebook has no code for class " + std::to_string(c));
    }
    require<ShapeError>(codebook.feature_dim() == model.input_dim(), "codebook dim differs from model input dim");
    return estimate_fim_diagonal(model, codebook.as_dataset(class_set), class_set, FimSource::mnemonic);
}

/// ||a - b||_2 divided by the number of parameters.
[[nodiscard]] inline double fim_error(const FimDiagonal& a, const FimDiagonal& b) {
    nn::require_aligned(a.values, b.values, "fim_error");
    const auto x = a.values.values();
    const auto y = b.values.values();
    require(!x.empty(), "fim_error of empty vectors");
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return std::sqrt(sum) / static_cast<double>(x.size());
}

}  // namespace mnemo::unlearn
