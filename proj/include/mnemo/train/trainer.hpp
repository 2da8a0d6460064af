#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/core/rng.hpp"
#include "mnemo/data/codebook.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/nn/mlp.hpp"
#include "mnemo/nn/sgd.hpp"

namespace mnemo::train {

using data::LabeledDataset;
using data::MnemonicCodebook;
using nn::Matrix;
using nn::MlpModel;

struct TrainConfig {
    double t_mix = 0.0;
    std::size_t epochs = 1;
    std::size_t batch_size = 128;
    nn::SgdConfig sgd;
    std::uint64_t seed = 0;
    std::vector<int> excluded_classes;

    void validate(std::size_t num_classes) const {
        require(t_mix >= 0.0 && t_mix <= 1.0, "t_mix must lie in [0, 1]");
        require(epochs > 0, "epochs must be positive");
        require(batch_size > 0, "batch_size must be positive");
        sgd.validate();
        for (int c : excluded_classes) {
            require(c >= 0 && static_cast<std::size_t>(c) < num_classes,
                    "excluded class " + std::to_string(c) + " is not a dataset class");
        }
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // sample-weighted mean of mini-batch losses
    std::optional<double> test_accuracy;
    std::size_t replacements = 0;
    std::size_t steps = 0;
};

struct TrainRecord {
    std::vector<EpochRecord> epochs;
    std::size_t replacement_count = 0;
    std::size_t backprop_count = 0;
    std::size_t samples = 0;  // training samples after class exclusion
    double wall_time = 0.0;   // seconds
};

/// Sees every mini-batch right before its SGD step.
using BatchObserver = std::function<void(std::size_t step, const Matrix& inputs, std::span<const int> labels)>;

/// Epoch-wise stream of mini-batches in which each sample is swapped for a
/// code of its own class with probability t_mix. The draws for an epoch happen
/// before that epoch's shuffle; labels are never altered.
class MixedBatchStream {
public:
    MixedBatchStream(const LabeledDataset& dataset, const MnemonicCodebook* codebook, const TrainConfig& config)
        : dataset_(dataset),
          codebook_(codebook),
          config_(config),
          replace_rng_(derive_seed(config.seed, "train.replace")),
          shuffle_rng_(derive_seed(config.seed, "train.shuffle")) {
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            const int y = dataset.labels[i];
            if (std::find(config.excluded_classes.begin(), config.excluded_classes.end(), y) ==
                config.excluded_classes.end()) {
                active_.push_back(i);
            }
        }
        require(!active_.empty(), "no training samples left after class exclusion");
        code_choice_.assign(active_.size(), -1);
        order_.resize(active_.size());
    }

    [[nodiscard]] std::size_t samples() const noexcept { return active_.size(); }
    [[nodiscard]] std::size_t batches_per_epoch() const noexcept {
        return (active_.size() + config_.batch_size - 1) / config_.batch_size;
    }

    /// Redraws replacements and reshuffles. Returns the replacement count.
    std::size_t begin_epoch() {
        std::size_t replaced = 0;
        const std::size_t per_class = codebook_ != nullptr ? codebook_->codes_per_class() : 0;
        for (std::size_t k = 0; k < active_.size(); ++k) {
            const double t = uniform01(replace_rng_);
            code_choice_[k] = -1;
            if (t < config_.t_mix) {
                code_choice_[k] = per_class > 1 ? static_cast<int>(uniform_index(replace_rng_, per_class)) : 0;
                ++replaced;
            }
        }
        for (std::size_t k = 0; k < order_.size(); ++k) {
            order_[k] = k;
        }
        mnemo::shuffle(order_.begin(), order_.end(), shuffle_rng_);
        cursor_ = 0;
        return replaced;
    }

    [[nodiscard]] bool epoch_done() const noexcept { return cursor_ >= order_.size(); }

    void next_batch(Matrix& inputs, std::vector<int>& labels) {
        const std::size_t n = std::min(config_.batch_size, order_.size() - cursor_);
        inputs.resize(static_cast<Eigen::Index>(n), dataset_.inputs.cols());
        labels.resize(n);
        for (std::size_t b = 0; b < n; ++b) {
            const std::size_t k = order_[cursor_ + b];
            const std::size_t row = active_[k];
            const int y = dataset_.labels[row];
            labels[b] = y;
            if (code_choice_[k] >= 0) {
                inputs.row(static_cast<Eigen::Index>(b)) = codebook_->codes(y).row(code_choice_[k]);
            } else {
                inputs.row(static_cast<Eigen::Index>(b)) = dataset_.inputs.row(static_cast<Eigen::Index>(row));
            }
        }
        cursor_ += n;
    }

private:
    const LabeledDataset& dataset_;
    const MnemonicCodebook* codebook_;
    const TrainConfig& config_;
    Rng replace_rng_;
    Rng shuffle_rng_;
    std::vector<std::size_t> active_;
    std::vector<int> code_choice_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

namespace detail {

inline void check_codebook(const LabeledDataset& dataset, const MnemonicCodebook& codebook) {
    require<ShapeError>(codebook.feature_dim() == dataset.feature_dim(),
                        "codebook feature dim " + std::to_string(codebook.feature_dim()) + " differs from dataset dim " +
                            std::to_string(dataset.feature_dim()));
    for (std::size_t c = 0; c < dataset.num_classes; ++c) {
        require(codebook.covers(static_cast<int>(c)), "codebook has no code for class " + std::to_string(c));
    }
}

/// Runs SGD steps until `max_steps` or `epochs` full passes, whichever comes first.
inline TrainRecord run(MlpModel& model, const LabeledDataset& dataset, const LabeledDataset* test,
                       const MnemonicCodebook* codebook, const TrainConfig& config, std::size_t epochs,
                       std::optional<std::size_t> max_steps, const BatchObserver& observer) {
    const auto start = std::chrono::steady_clock::now();
    MixedBatchStream stream(dataset, codebook, config);
    TrainRecord record;
    record.samples = stream.samples();

    Matrix inputs;
    std::vector<int> labels;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        if (max_steps && step >= *max_steps) {
            break;
        }
        EpochRecord er;
        er.epoch = epoch;
        er.replacements = stream.begin_epoch();
        double loss_sum = 0.0;
        std::size_t seen = 0;
        while (!stream.epoch_done() && !(max_steps && step >= *max_steps)) {
            stream.next_batch(inputs, labels);
            if (observer) {
                observer(step, inputs, labels);
            }
            const auto lg = nn::loss_and_grad(model, inputs, labels);
            nn::sgd_step(model, lg.grad, config.sgd, step);
            loss_sum += lg.loss * static_cast<double>(labels.size());
            seen += labels.size();
            ++step;
            ++er.steps;
        }
        er.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
        if (test != nullptr) {
            er.test_accuracy = nn::accuracy(model, test->inputs, test->labels);
        }
        record.replacement_count += er.replacements;
        record.epochs.push_back(er);
    }
    record.backprop_count = step;
    record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return record;
}

}  // namespace detail

struct TrainResult {
    MlpModel model;
    TrainRecord record;
};

/// Training with stochastic mnemonic-code replacement. `test` is optional and
/// only used for the per-epoch accuracy column.
[[nodiscard]] inline TrainResult train_with_codes(const LabeledDataset& dataset, const MnemonicCodebook& codebook,
                                                  const std::vector<std::size_t>& layer_dims, const TrainConfig& config,
                                                  const LabeledDataset* test = nullptr,
                                                  const BatchObserver& observer = {}) {
    dataset.validate();
    require(!dataset.empty(), "training set is empty");
    config.validate(dataset.num_classes);
    detail::check_codebook(dataset, codebook);
    require<ShapeError>(layer_dims.front() == dataset.feature_dim() && layer_dims.back() == dataset.num_classes,
                        "layer dims do not match the dataset");
    MlpModel model = MlpModel::initialize(layer_dims, config.seed);
    auto record = detail::run(model, dataset, test, &codebook, config, config.epochs, std::nullopt, observer);
    return {std::move(model), std::move(record)};
}

/// Ordinary training; t_mix is ignored. With the same seed this follows exactly
/// the same arithmetic as train_with_codes at t_mix = 0.
[[nodiscard]] inline TrainResult plain_train(const LabeledDataset& dataset, const std::vector<std::size_t>& layer_dims,
                                             TrainConfig config, const LabeledDataset* test = nullptr,
                                             const BatchObserver& observer = {}) {
    dataset.validate();
    require(!dataset.empty(), "training set is empty");
    config.t_mix = 0.0;
    config.validate(dataset.num_classes);
    require<ShapeError>(layer_dims.front() == dataset.feature_dim() && layer_dims.back() == dataset.num_classes,
                        "layer dims do not match the dataset");
    MlpModel model = MlpModel::initialize(layer_dims, config.seed);
    auto record = detail::run(model, dataset, test, nullptr, config, config.epochs, std::nullopt, observer);
    return {std::move(model), std::move(record)};
}

/// Exactly `steps` mixed mini-batch SGD steps on a copy of `pretrained`.
[[nodiscard]] inline TrainResult finetune_with_codes(const MlpModel& pretrained, const LabeledDataset& dataset,
                                                     const MnemonicCodebook& codebook, std::size_t steps,
                                                     const TrainConfig& config, const LabeledDataset* test = nullptr,
                                                     const BatchObserver& observer = {}) {
    dataset.validate();
    config.validate(dataset.num_classes);
    detail::check_codebook(dataset, codebook);
    require<ShapeError>(pretrained.input_dim() == dataset.feature_dim() && pretrained.num_classes() == dataset.num_classes,
                        "pretrained model does not match the dataset dims");
    MlpModel model = pretrained;
    if (steps == 0) {
        return {std::move(model), TrainRecord{}};
    }
    MixedBatchStream probe(dataset, &codebook, config);
    const std::size_t epochs = (steps + probe.batches_per_epoch() - 1) / probe.batches_per_epoch();
    auto record = detail::run(model, dataset, test, &codebook, config, epochs, steps, observer);
    return {std::move(model), std::move(record)};
}

}  // namespace mnemo::train
