#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mnemo/core/rng.hpp"
#include "mnemo/unlearn/fisher.hpp"
#include "mnemo/unlearn/forget.hpp"

namespace mnemo::eval {

/// One x position of an error curve; also the CSV row (x, mean, std, seed_count).
struct CurvePoint {
    double x = 0.0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t seed_count = 0;
    std::vector<double> values;  // one per seed
    bool capped = false;         // requested count exceeded some class size
};

struct FimStudy {
    std::vector<int> class_set;
    double mnemonic_error = 0.0;
    std::vector<CurvePoint> data_curve;
    std::vector<std::string> notes;
};

inline void summarize(CurvePoint& p) {
    p.seed_count = p.values.size();
    double s = 0.0;
    for (double v : p.values) {
        s += v;
    }
    p.mean = p.values.empty() ? 0.0 : s / static_cast<double>(p.values.size());
    double ss = 0.0;
    for (double v : p.values) {
        ss += (v - p.mean) * (v - p.mean);
    }
    p.std = p.values.size() > 1 ? std::sqrt(ss / static_cast<double>(p.values.size() - 1)) : 0.0;
}

/// Distance to the oracle Fisher diagonal (all training samples of the class
/// set) of data diagonals from n random samples per class, per seed, and of
/// the code diagonal.
[[nodiscard]] inline FimStudy fim_approximation_study(const nn::MlpModel& model, const data::LabeledDataset& dataset,
                                                      const data::MnemonicCodebook& codebook,
                                                      const std::vector<int>& class_set,
                                                      const std::vector<std::size_t>& sample_counts,
                                                      const std::vector<std::uint64_t>& seeds) {
    require(!sample_counts.empty(), "sample_counts must be nonempty");
    require(!seeds.empty(), "seeds must be nonempty");
    FimStudy study;
    study.class_set = class_set;
    const auto everything = unlearn::sample_per_class(dataset, class_set, std::nullopt, 0);
    const auto oracle =
        unlearn::estimate_fim_diagonal(model, everything.samples, class_set, unlearn::FimSource::oracle);
    study.mnemonic_error = unlearn::fim_error(unlearn::fim_from_codebook(model, codebook, class_set), oracle);

    for (std::size_t n : sample_counts) {
        require(n > 0, "sample counts must be positive");
        CurvePoint point;
        point.x = static_cast<double>(n);
        for (std::uint64_t seed : seeds) {
            const auto drawn = unlearn::sample_per_class(dataset, class_set, n, seed);
            if (!drawn.notes.empty()) {
                point.capped = true;
            }
            const auto approx =
                unlearn::estimate_fim_diagonal(model, drawn.samples, class_set, unlearn::FimSource::data);
            point.values.push_back(unlearn::fim_error(approx, oracle));
        }
        if (point.capped) {
            study.notes.push_back("n=" + std::to_string(n) + " exceeds a class size; capped at the class size");
        }
        summarize(point);
        study.data_curve.push_back(std::move(point));
    }
    return study;
}

}  // namespace mnemo::eval
