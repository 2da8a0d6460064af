#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::data {

using nn::Matrix;

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

/// Scalar standardization x' = (x - mean) / stddev.
struct Normalization {
    double mean = 0.0;
    double stddev = 1.0;

    bool operator==(const Normalization&) const = default;
};

/// Samples as rows of `inputs` with integer class labels.
struct LabeledDataset {
    Matrix inputs;
    std::vector<int> labels;
    std::size_t num_classes = 0;
    Split split = Split::train;
    Normalization normalization;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(inputs.cols()); }
    [[nodiscard]] bool empty() const noexcept { return labels.empty(); }

    void validate() const {
        require(num_classes > 0, "dataset needs at least one class");
        require<ShapeError>(static_cast<std::size_t>(inputs.rows()) == labels.size(),
                            "dataset row count differs from label count");
        for (int y : labels) {
            require(y >= 0 && static_cast<std::size_t>(y) < num_classes,
                    "dataset label " + std::to_string(y) + " out of range");
        }
        require<NonFiniteError>(inputs.allFinite(), "dataset inputs must be finite");
    }

    [[nodiscard]] std::vector<std::size_t> indices_of(int cls) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) {
                out.push_back(i);
            }
        }
        return out;
    }

    [[nodiscard]] std::size_t count_of(int cls) const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), cls));
    }

    /// Rows at `indices`, in that order, with their labels.
    [[nodiscard]] LabeledDataset subset(std::span<const std::size_t> indices) const {
        LabeledDataset out{Matrix(static_cast<Eigen::Index>(indices.size()), inputs.cols()), {}, num_classes, split,
                           normalization};
        out.labels.reserve(indices.size());
        for (std::size_t k = 0; k < indices.size(); ++k) {
            out.inputs.row(static_cast<Eigen::Index>(k)) = inputs.row(static_cast<Eigen::Index>(indices[k]));
            out.labels.push_back(labels[indices[k]]);
        }
        return out;
    }

    /// Samples whose label is in `classes`.
    [[nodiscard]] LabeledDataset restricted_to(std::span<const int> classes) const {
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (std::find(classes.begin(), classes.end(), labels[i]) != classes.end()) {
                keep.push_back(i);
            }
        }
        return subset(keep);
    }

    [[nodiscard]] LabeledDataset of_class(int cls) const { return restricted_to(std::span<const int>(&cls, 1)); }
};

/// C_F and C_R; sorted, disjoint, and together covering [0, num_classes).
class ClassPartition {
public:
    ClassPartition(std::size_t num_classes, std::vector<int> forget) : num_classes_(num_classes), forget_(std::move(forget)) {
        std::sort(forget_.begin(), forget_.end());
        require(std::adjacent_find(forget_.begin(), forget_.end()) == forget_.end(), "duplicate forget class");
        require(!forget_.empty(), "forget set must be nonempty");
        for (int c : forget_) {
            require(c >= 0 && static_cast<std::size_t>(c) < num_classes,
                    "forget class " + std::to_string(c) + " outside [0, " + std::to_string(num_classes) + ")");
        }
        for (int c = 0; c < static_cast<int>(num_classes); ++c) {
            if (!std::binary_search(forget_.begin(), forget_.end(), c)) {
                remain_.push_back(c);
            }
        }
        require(!remain_.empty(), "remain set must be nonempty");
    }

    static ClassPartition single(std::size_t num_classes, int forget_class) {
        return ClassPartition(num_classes, {forget_class});
    }

    [[nodiscard]] const std::vector<int>& forget() const noexcept { return forget_; }
    [[nodiscard]] const std::vector<int>& remain() const noexcept { return remain_; }
    [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }

    [[nodiscard]] bool forgets(int c) const { return std::binary_search(forget_.begin(), forget_.end(), c); }

private:
    std::size_t num_classes_;
    std::vector<int> forget_;
    std::vector<int> remain_;
};

}  // namespace mnemo::data
