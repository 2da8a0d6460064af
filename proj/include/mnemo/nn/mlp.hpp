#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mnemo/core/error.hpp"
#include "mnemo/core/rng.hpp"
#include "mnemo/nn/parameters.hpp"

namespace mnemo::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstRowVectorMap = Eigen::Map<const RowVector>;

/// Fully connected network: ReLU on hidden layers, identity on the output.
///
/// Parameters are stored as `layer<l>.weight` (out x in, row-major) followed by
/// `layer<l>.bias` (out) for each layer, in order.
class MlpModel {
public:
    MlpModel() = default;

    MlpModel(std::vector<std::size_t> layer_dims, std::uint64_t seed, ParameterVector params)
        : dims_(std::move(layer_dims)), seed_(seed), params_(std::move(params)) {
        require<ShapeError>(params_.layout() == layout_for(dims_), "parameters do not match layer dims");
        require<NonFiniteError>(params_.all_finite(), "model parameters must be finite");
    }

    /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static MlpModel initialize(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
        ParameterVector params(layout_for(layer_dims));
        Rng rng(derive_seed(seed, "init"));
        for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(layer_dims[l]));
            for (std::size_t part = 0; part < 2; ++part) {
                for (double& v : params.segment(2 * l + part)) {
                    v = (2.0 * uniform01(rng) - 1.0) * bound;
                }
            }
        }
        return MlpModel(std::move(layer_dims), seed, std::move(params));
    }

    static Layout layout_for(const std::vector<std::size_t>& dims) {
        require<ShapeError>(dims.size() >= 2, "an MLP needs at least input and output dims");
        std::vector<std::pair<std::string, std::vector<std::size_t>>> tensors;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            require<ShapeError>(dims[l] > 0 && dims[l + 1] > 0, "layer dims must be positive");
            const std::string prefix = "layer" + std::to_string(l);
            tensors.push_back({prefix + ".weight", {dims[l + 1], dims[l]}});
            tensors.push_back({prefix + ".bias", {dims[l + 1]}});
        }
        return Layout::from_shapes(tensors);
    }

    [[nodiscard]] const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return dims_.front(); }
    [[nodiscard]] std::size_t num_classes() const noexcept { return dims_.back(); }
    [[nodiscard]] std::size_t num_layers() const noexcept { return dims_.size() - 1; }

    [[nodiscard]] const ParameterVector& params() const noexcept { return params_; }
    [[nodiscard]] ParameterVector& mutable_params() noexcept { return params_; }

    [[nodiscard]] ConstMatrixMap weight(std::size_t l) const {
        return ConstMatrixMap(params_.segment(2 * l).data(), static_cast<Eigen::Index>(dims_[l + 1]),
                              static_cast<Eigen::Index>(dims_[l]));
    }
    [[nodiscard]] ConstRowVectorMap bias(std::size_t l) const {
        return ConstRowVectorMap(params_.segment(2 * l + 1).data(), static_cast<Eigen::Index>(dims_[l + 1]));
    }

private:
    std::vector<std::size_t> dims_;
    std::uint64_t seed_ = 0;
    ParameterVector params_;
};

namespace detail {

inline void check_batch(const MlpModel& model, const Matrix& batch) {
    require<ShapeError>(static_cast<std::size_t>(batch.cols()) == model.input_dim(),
                        "batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                            std::to_string(model.input_dim()));
}

inline void check_labels(const MlpModel& model, const Matrix& batch, std::span<const int> labels) {
    require(batch.rows() > 0, "batch is empty");
    require<ShapeError>(static_cast<std::size_t>(batch.rows()) == labels.size(), "label count differs from batch rows");
    for (int y : labels) {
        require(y >= 0 && static_cast<std::size_t>(y) < model.num_classes(),
                "label " + std::to_string(y) + " outside [0, " + std::to_string(model.num_classes()) + ")");
    }
}

/// Post-activation outputs of every layer; the last entry holds the logits.
inline std::vector<Matrix> forward_all(const MlpModel& model, const Matrix& batch) {
    std::vector<Matrix> outputs;
    outputs.reserve(model.num_layers());
    const Matrix* input = &batch;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        Matrix z(input->rows(), model.weight(l).rows());
        z.noalias() = *input * model.weight(l).transpose();
        z.rowwise() += model.bias(l);
        if (l + 1 < model.num_layers()) {
            z = z.cwiseMax(0.0);
        }
        outputs.push_back(std::move(z));
        input = &outputs.back();
    }
    return outputs;
}

/// Walks layers from the output back to the input. `visit(l, delta, layer_input)`
/// sees dLoss/dPreactivation for layer l and the activations feeding it.
template <class Visit>
void backpropagate(const MlpModel& model, const Matrix& batch, const std::vector<Matrix>& outputs, Matrix delta,
                   Visit&& visit) {
    for (std::size_t l = model.num_layers(); l-- > 0;) {
        const Matrix& layer_input = l == 0 ? batch : outputs[l - 1];
        visit(l, delta, layer_input);
        if (l > 0) {
            Matrix previous = delta * model.weight(l);
            delta = (layer_input.array() > 0.0).select(previous, 0.0);
        }
    }
}

/// Row-wise softmax minus one-hot, i.e. dLoss_i/dLogits for each sample i.
inline Matrix softmax_residual(const Matrix& logits, std::span<const int> labels) {
    Matrix p = logits;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double m = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
        p(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
    return p;
}

inline double sample_loss(const Matrix& logits, Eigen::Index i, int label) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    return lse - logits(i, label);
}

}  // namespace detail

[[nodiscard]] inline Matrix forward(const MlpModel& model, const Matrix& batch) {
    detail::check_batch(model, batch);
    auto outputs = detail::forward_all(model, batch);
    return std::move(outputs.back());
}

[[nodiscard]] inline Matrix softmax(const Matrix& logits) {
    Matrix p = logits;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double m = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

/// Argmax per row; ties go to the lowest class index.
[[nodiscard]] inline std::vector<int> argmax_rows(const Matrix& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) {
                best = j;
            }
        }
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

[[nodiscard]] inline std::vector<int> predict(const MlpModel& model, const Matrix& batch) {
    return argmax_rows(forward(model, batch));
}

struct LossAndGrad {
    double loss = 0.0;
    GradientVector grad;
};

/// Mean softmax cross-entropy over the batch and its gradient.
[[nodiscard]] inline LossAndGrad loss_and_grad(const MlpModel& model, const Matrix& batch, std::span<const int> labels) {
    detail::check_batch(model, batch);
    detail::check_labels(model, batch, labels);
    require<NonFiniteError>(batch.allFinite(), "batch contains non-finite values");

    const auto outputs = detail::forward_all(model, batch);
    const Matrix& logits = outputs.back();
    const auto n = static_cast<double>(batch.rows());

    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        loss += detail::sample_loss(logits, i, labels[static_cast<std::size_t>(i)]);
    }

    LossAndGrad result{loss / n, GradientVector(model.params().layout())};
    Matrix delta = detail::softmax_residual(logits, labels) / n;
    detail::backpropagate(model, batch, outputs, std::move(delta),
                          [&](std::size_t l, const Matrix& d, const Matrix& input) {
                              MatrixMap w_grad(result.grad.segment(2 * l).data(), d.cols(), input.cols());
                              w_grad.noalias() = d.transpose() * input;
                              Eigen::Map<RowVector> b_grad(result.grad.segment(2 * l + 1).data(), d.cols());
                              b_grad = d.colwise().sum();
                          });
    return result;
}

/// loss_and_grad over a large set, evaluated in row chunks to bound memory.
[[nodiscard]] inline LossAndGrad loss_and_grad_chunked(const MlpModel& model, const Matrix& batch,
                                                       std::span<const int> labels, Eigen::Index chunk = 4096) {
    require(batch.rows() > 0, "batch is empty");
    if (batch.rows() <= chunk) {
        return loss_and_grad(model, batch, labels);
    }
    LossAndGrad total{0.0, GradientVector(model.params().layout())};
    const auto n = static_cast<double>(batch.rows());
    for (Eigen::Index begin = 0; begin < batch.rows(); begin += chunk) {
        const Eigen::Index rows = std::min(chunk, batch.rows() - begin);
        const Matrix part = batch.middleRows(begin, rows);
        const auto part_result =
            loss_and_grad(model, part, labels.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(rows)));
        const double weight = static_cast<double>(rows) / n;
        total.loss += part_result.loss * weight;
        auto dst = total.grad.values();
        const auto src = part_result.grad.values();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += src[i] * weight;
        }
    }
    return total;
}

/// Adds sum_i (dLoss_i/dw)^2 over the samples of the batch into `sums`.
///
/// A dense layer's per-sample weight gradient is the outer product
/// delta_i * input_i^T, so its elementwise square is delta_i^2 * (input_i^2)^T
/// and the batch sum reduces to one matrix product per layer.
inline void accumulate_squared_gradients(const MlpModel& model, const Matrix& batch, std::span<const int> labels,
                                         GradientVector& sums) {
    detail::check_batch(model, batch);
    detail::check_labels(model, batch, labels);
    require<NonFiniteError>(batch.allFinite(), "batch contains non-finite values");
    require_aligned(sums, model.params(), "accumulate_squared_gradients");

    const auto outputs = detail::forward_all(model, batch);
    Matrix delta = detail::softmax_residual(outputs.back(), labels);
    detail::backpropagate(model, batch, outputs, std::move(delta),
                          [&](std::size_t l, const Matrix& d, const Matrix& input) {
                              const Matrix d2 = d.array().square().matrix();
                              const Matrix in2 = input.array().square().matrix();
                              MatrixMap w_sum(sums.segment(2 * l).data(), d.cols(), input.cols());
                              w_sum.noalias() += d2.transpose() * in2;
                              Eigen::Map<RowVector> b_sum(sums.segment(2 * l + 1).data(), d.cols());
                              b_sum += d2.colwise().sum();
                          });
}

/// Cross-entropy of each sample.
[[nodiscard]] inline std::vector<double> per_sample_losses(const MlpModel& model, const Matrix& batch,
                                                           std::span<const int> labels) {
    detail::check_batch(model, batch);
    detail::check_labels(model, batch, labels);
    const Matrix logits = forward(model, batch);
    std::vector<double> losses(labels.size());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        losses[static_cast<std::size_t>(i)] = detail::sample_loss(logits, i, labels[static_cast<std::size_t>(i)]);
    }
    return losses;
}

/// Percentage of rows whose argmax equals the label.
[[nodiscard]] inline double accuracy(const MlpModel& model, const Matrix& batch, std::span<const int> labels) {
    require(batch.rows() > 0, "accuracy of an empty batch");
    require<ShapeError>(static_cast<std::size_t>(batch.rows()) == labels.size(), "label count differs from batch rows");
    const auto predicted = predict(model, batch);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        correct += predicted[i] == labels[i] ? 1 : 0;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(predicted.size());
}

}  // namespace mnemo::nn
