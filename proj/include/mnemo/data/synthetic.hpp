#pragma once

#include <cstdint>

#include "mnemo/core/rng.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/data/mnist.hpp"

namespace mnemo::data {

/// Gaussian clusters: class c's samples are center_c + spread * N(0, I), with
/// center_c ~ N(0, I). Train and test come from separate streams. Inputs are
/// left unscaled (identity normalization).
[[nodiscard]] inline TrainTestPair make_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                                                  double cluster_spread, std::uint64_t seed) {
    require(num_classes > 0, "num_classes must be positive");
    require(per_class >= 1, "per_class must be at least 1");
    require(dim >= 1, "dim must be at least 1");
    require(cluster_spread >= 0.0 && std::isfinite(cluster_spread), "cluster_spread must be nonnegative");

    Matrix centers(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(dim));
    {
        Rng rng(derive_seed(seed, "synthetic.centers"));
        NormalSampler normal;
        for (Eigen::Index i = 0; i < centers.size(); ++i) {
            centers.data()[i] = normal(rng);
        }
    }

    auto draw = [&](Split split, const char* stream) {
        Rng rng(derive_seed(seed, stream));
        NormalSampler normal;
        LabeledDataset ds{Matrix(static_cast<Eigen::Index>(num_classes * per_class), static_cast<Eigen::Index>(dim)),
                          {}, num_classes, split, Normalization{}};
        Eigen::Index row = 0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            for (std::size_t k = 0; k < per_class; ++k, ++row) {
                for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) {
                    ds.inputs(row, j) = centers(static_cast<Eigen::Index>(c), j) + cluster_spread * normal(rng);
                }
                ds.labels.push_back(static_cast<int>(c));
            }
        }
        return ds;
    };
    return {draw(Split::train, "synthetic.train"), draw(Split::test, "synthetic.test")};
}

}  // namespace mnemo::data
