#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mnemo/core/error.hpp"
#include "mnemo/core/rng.hpp"
#include "mnemo/data/codebook.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/nn/mlp.hpp"
#include "mnemo/unlearn/fisher.hpp"
#include "mnemo/unlearn/perturbation.hpp"

namespace mnemo::unlearn {

using data::ClassPartition;

struct ForgetReport {
    int chosen_sign = 1;
    double score_plus = 0.0;   // A_R + E_F of w + alpha*eta on the scoring set
    double score_minus = 0.0;  // same for w - alpha*eta
    double wall_time = 0.0;    // seconds, Fisher estimation through sign choice
    std::size_t backprop_count = 0;
    std::size_t eval_forward_passes = 0;
    std::size_t inexact_parameters = 0;
    std::vector<LayerAlpha> alpha;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double epsilon = kDefaultEpsilon;
    FimSource source = FimSource::mnemonic;
    std::vector<int> forget_classes;
    std::vector<std::size_t> samples_per_class;  // forget classes first, then remain, in class order
    std::vector<std::string> notes;
};

struct ForgetResult {
    MlpModel model;
    ForgetReport report;
};

/// +1 unless the negative candidate scores strictly higher.
[[nodiscard]] constexpr int choose_sign(double score_plus, double score_minus) noexcept {
    return score_minus > score_plus ? -1 : 1;
}

/// A_R + E_F measured on a labeled scoring set: accuracy over the samples of
/// remaining classes plus (100 - accuracy) over those of forgetting classes.
[[nodiscard]] inline double forgetting_score(const MlpModel& model, const LabeledDataset& scoring,
                                             const ClassPartition& partition) {
    const auto predicted = nn::predict(model, scoring.inputs);
    std::size_t remain_total = 0, remain_hit = 0, forget_total = 0, forget_hit = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool hit = predicted[i] == scoring.labels[i];
        if (partition.forgets(scoring.labels[i])) {
            ++forget_total;
            forget_hit += hit ? 1 : 0;
        } else {
            ++remain_total;
            remain_hit += hit ? 1 : 0;
        }
    }
    require(remain_total > 0 && forget_total > 0, "scoring set must contain both partitions");
    const double a_r = 100.0 * static_cast<double>(remain_hit) / static_cast<double>(remain_total);
    const double a_f = 100.0 * static_cast<double>(forget_hit) / static_cast<double>(forget_total);
    return a_r + (100.0 - a_f);
}

namespace detail {

inline ForgetResult perturb_and_select(const MlpModel& model, const FimDiagonal& forget, const FimDiagonal& remain,
                                       const LabeledDataset& scoring, const ClassPartition& partition, double lambda1,
                                       double lambda2, double epsilon,
                                       std::chrono::steady_clock::time_point start) {
    const PerturbationPlan plan = make_plan(forget, remain, lambda1, lambda2, epsilon);
    auto pair = apply_plan(model.params(), plan);
    MlpModel plus(model.layer_dims(), model.seed(), std::move(pair.plus));
    MlpModel minus(model.layer_dims(), model.seed(), std::move(pair.minus));
    const double score_plus = forgetting_score(plus, scoring, partition);
    const double score_minus = forgetting_score(minus, scoring, partition);
    const int sign = choose_sign(score_plus, score_minus);

    ForgetReport report;
    report.chosen_sign = sign;
    report.score_plus = score_plus;
    report.score_minus = score_minus;
    report.backprop_count = forget.backprop_count + remain.backprop_count;
    report.eval_forward_passes = 2;
    report.inexact_parameters = pair.inexact;
    report.alpha = plan.alpha;
    report.lambda1 = lambda1;
    report.lambda2 = lambda2;
    report.epsilon = epsilon;
    report.source = forget.source;
    report.forget_classes = partition.forget();
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {sign > 0 ? std::move(plus) : std::move(minus), std::move(report)};
}

inline void check_model(const MlpModel& model, const ClassPartition& partition) {
    require<NonFiniteError>(model.params().all_finite(), "model parameters are not finite");
    require<ShapeError>(model.num_classes() == partition.num_classes(), "partition class count differs from model");
}

}  // namespace detail

/// One-shot class forgetting from mnemonic codes. The input model is not modified.
[[nodiscard]] inline ForgetResult forget(const MlpModel& model, const MnemonicCodebook& codebook,
                                         const ClassPartition& partition, double lambda1, double lambda2,
                                         double epsilon = kDefaultEpsilon) {
    detail::check_model(model, partition);
    require<ShapeError>(codebook.feature_dim() == model.input_dim(), "codebook dim differs from model input dim");
    require(codebook.num_classes() >= partition.num_classes(), "codebook does not cover every class");
    const auto start = std::chrono::steady_clock::now();

    const FimDiagonal f_forget = fim_from_codebook(model, codebook, partition.forget());
    const FimDiagonal f_remain = fim_from_codebook(model, codebook, partition.remain());
    const LabeledDataset scoring = codebook.as_dataset();
    auto result = detail::perturb_and_select(model, f_forget, f_remain, scoring, partition, lambda1, lambda2, epsilon,
                                             start);
    result.report.samples_per_class.assign(partition.forget().size() + partition.remain().size(),
                                           codebook.codes_per_class());
    return result;
}

/// Seeded draw of up to `per_class` training samples of each class
/// (all of them when `per_class` is empty).
struct ClassSample {
    LabeledDataset samples;
    std::vector<std::size_t> counts;  // in the order of `classes`
    std::vector<std::string> notes;
};

[[nodiscard]] inline ClassSample sample_per_class(const LabeledDataset& dataset, const std::vector<int>& classes,
                                                  std::optional<std::size_t> per_class, std::uint64_t seed) {
    std::vector<std::size_t> chosen;
    ClassSample out;
    for (int c : classes) {
        auto rows = dataset.indices_of(c);
        require(!rows.empty(), "class " + std::to_string(c) + " has no training samples");
        if (per_class && *per_class < rows.size()) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
            mnemo::shuffle(rows.begin(), rows.end(), rng);
            rows.resize(*per_class);
            std::sort(rows.begin(), rows.end());
        } else if (per_class && *per_class > rows.size()) {
            out.notes.push_back("class " + std::to_string(c) + " has only " + std::to_string(rows.size()) +
                                " samples; requested " + std::to_string(*per_class) + ", using all");
        }
        out.counts.push_back(rows.size());
        chosen.insert(chosen.end(), rows.begin(), rows.end());
    }
    out.samples = dataset.subset(chosen);
    return out;
}

/// Same pipeline with Fisher diagonals and sign scoring taken from training
/// data instead of codes. `per_class` empty means every training sample.
[[nodiscard]] inline ForgetResult forget_with_data(const MlpModel& model, const LabeledDataset& dataset,
                                                   const ClassPartition& partition, double lambda1, double lambda2,
                                                   std::optional<std::size_t> per_class, std::uint64_t seed,
                                                   double epsilon = kDefaultEpsilon) {
    detail::check_model(model, partition);
    require(!per_class || *per_class >= 1, "samples per class must be at least 1");
    require<ShapeError>(dataset.feature_dim() == model.input_dim(), "dataset dim differs from model input dim");
    const auto start = std::chrono::steady_clock::now();

    const auto forget_sample = sample_per_class(dataset, partition.forget(), per_class, derive_seed(seed, "forget"));
    const auto remain_sample = sample_per_class(dataset, partition.remain(), per_class, derive_seed(seed, "remain"));
    const FimSource source = per_class ? FimSource::data : FimSource::oracle;
    const FimDiagonal f_forget = estimate_fim_diagonal(model, forget_sample.samples, partition.forget(), source);
    const FimDiagonal f_remain = estimate_fim_diagonal(model, remain_sample.samples, partition.remain(), source);

    LabeledDataset scoring = forget_sample.samples;
    scoring.inputs.conservativeResize(scoring.inputs.rows() + remain_sample.samples.inputs.rows(), Eigen::NoChange);
    scoring.inputs.bottomRows(remain_sample.samples.inputs.rows()) = remain_sample.samples.inputs;
    scoring.labels.insert(scoring.labels.end(), remain_sample.samples.labels.begin(), remain_sample.samples.labels.end());

    auto result = detail::perturb_and_select(model, f_forget, f_remain, scoring, partition, lambda1, lambda2, epsilon,
                                             start);
    result.report.samples_per_class = forget_sample.counts;
    result.report.samples_per_class.insert(result.report.samples_per_class.end(), remain_sample.counts.begin(),
                                           remain_sample.counts.end());
    result.report.notes = forget_sample.notes;
    result.report.notes.insert(result.report.notes.end(), remain_sample.notes.begin(), remain_sample.notes.end());
    return result;
}

}  // namespace mnemo::unlearn
