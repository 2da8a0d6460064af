#include <cmath>

#include <gtest/gtest.h>

#include "mnemo/data/codebook.hpp"
#include "mnemo/data/synthetic.hpp"
#include "mnemo/train/trainer.hpp"
#include "test_support.hpp"

namespace mnemo::train {
namespace {

struct Fixture {
    data::TrainTestPair data = data::make_synthetic(4, 50, 6, 0.5, 3);
    data::MnemonicCodebook book = data::generate_codebook(4, 6, 1, 3);
    std::vector<std::size_t> dims{6, 8, 4};

    TrainConfig config(double t_mix, std::size_t epochs = 3) const {
        TrainConfig c;
        c.t_mix = t_mix;
        c.epochs = epochs;
        c.batch_size = 16;
        c.seed = 11;
        c.sgd.learning_rate = 0.05;
        return c;
    }
};

TEST(Trainer, ZeroMixIsBitIdenticalToPlainTraining) {
    Fixture f;
    const auto a = train_with_codes(f.data.train, f.book, f.dims, f.config(0.0));
    const auto b = plain_train(f.data.train, f.dims, f.config(0.7));
    EXPECT_TRUE(testing::bit_equal(a.model.params(), b.model.params()));
    EXPECT_EQ(a.record.replacement_count, 0u);
}

TEST(Trainer, SameSeedSameModel) {
    Fixture f;
    const auto a = train_with_codes(f.data.train, f.book, f.dims, f.config(0.3));
    const auto b = train_with_codes(f.data.train, f.book, f.dims, f.config(0.3));
    EXPECT_TRUE(testing::bit_equal(a.model.params(), b.model.params()));
    auto other = f.config(0.3);
    other.seed = 12;
    EXPECT_FALSE(testing::bit_equal(a.model.params(), train_with_codes(f.data.train, f.book, f.dims, other).model.params()));
}

TEST(Trainer, BackpropCountIsEpochsTimesBatches) {
    Fixture f;
    const auto r = train_with_codes(f.data.train, f.book, f.dims, f.config(0.2, 4));
    EXPECT_EQ(r.record.backprop_count, 4u * ((200u + 15u) / 16u));
    EXPECT_EQ(r.record.epochs.size(), 4u);
    EXPECT_EQ(r.record.samples, 200u);
}

// Replacements per epoch follow Binomial(N, t_mix); allow 5 standard deviations.
TEST(Trainer, ReplacementCountsAreBinomial) {
    Fixture f;
    for (double t : {0.1, 0.5, 0.9}) {
        const auto r = train_with_codes(f.data.train, f.book, f.dims, f.config(t, 20));
        const double n = 200.0 * 20.0;
        const double sd = std::sqrt(n * t * (1 - t));
        EXPECT_NEAR(static_cast<double>(r.record.replacement_count), n * t, 5 * sd) << "t_mix " << t;
    }
    const auto all = train_with_codes(f.data.train, f.book, f.dims, f.config(1.0, 2));
    EXPECT_EQ(all.record.replacement_count, 400u);
}

// Every row is either an untouched training row of its label's class or that
// class's code; labels never change.
TEST(Trainer, ObserverSeesLabelPreservingBatches) {
    Fixture f;
    std::size_t code_rows = 0, rows = 0;
    std::vector<std::size_t> label_counts(4, 0);
    auto observer = [&](std::size_t, const nn::Matrix& x, std::span<const int> y) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const int label = y[static_cast<std::size_t>(i)];
            ++label_counts[static_cast<std::size_t>(label)];
            ++rows;
            const nn::Matrix row = x.row(i);
            if (testing::bit_equal(row, nn::Matrix(f.book.codes(label).row(0)))) {
                ++code_rows;
                continue;
            }
            bool found = false;
            for (std::size_t j : f.data.train.indices_of(label)) {
                if (testing::bit_equal(row, nn::Matrix(f.data.train.inputs.row(static_cast<Eigen::Index>(j))))) {
                    found = true;
                    break;
                }
            }
            EXPECT_TRUE(found);
        }
    };
    const auto r = train_with_codes(f.data.train, f.book, f.dims, f.config(0.4, 2), nullptr, observer);
    EXPECT_EQ(rows, 400u);
    EXPECT_EQ(code_rows, r.record.replacement_count);
    for (auto c : label_counts) {
        EXPECT_EQ(c, 100u);  // each class appears once per epoch
    }
}

TEST(Trainer, ExcludedClassesAreNeverSeen) {
    Fixture f;
    auto config = f.config(0.5, 2);
    config.excluded_classes = {1};
    bool saw = false;
    const auto r = train_with_codes(f.data.train, f.book, f.dims, config, nullptr,
                                    [&](std::size_t, const nn::Matrix&, std::span<const int> y) {
                                        for (int v : y) saw = saw || v == 1;
                                    });
    EXPECT_FALSE(saw);
    EXPECT_EQ(r.record.samples, 150u);
}

TEST(Trainer, LearnsSeparableClusters) {
    Fixture f;
    const auto r = train_with_codes(f.data.train, f.book, f.dims, f.config(0.1, 30), &f.data.test);
    EXPECT_GT(*r.record.epochs.back().test_accuracy, 90.0);
    EXPECT_LT(r.record.epochs.back().train_loss, r.record.epochs.front().train_loss);
}

TEST(Trainer, FinetuneRunsExactStepCount) {
    Fixture f;
    const auto base = plain_train(f.data.train, f.dims, f.config(0.0, 2));
    const auto zero = finetune_with_codes(base.model, f.data.train, f.book, 0, f.config(0.1));
    EXPECT_TRUE(testing::bit_equal(zero.model.params(), base.model.params()));
    std::size_t seen = 0;
    const auto tuned = finetune_with_codes(base.model, f.data.train, f.book, 30, f.config(0.1), nullptr,
                                           [&](std::size_t, const nn::Matrix&, std::span<const int>) { ++seen; });
    EXPECT_EQ(seen, 30u);
    EXPECT_EQ(tuned.record.backprop_count, 30u);
    EXPECT_FALSE(testing::bit_equal(tuned.model.params(), base.model.params()));
}

TEST(Trainer, RejectsInvalidConfigurations) {
    Fixture f;
    EXPECT_THROW((void)train_with_codes(f.data.train, f.book, f.dims, f.config(1.5)), ValidationError);
    auto c = f.config(0.1);
    c.batch_size = 0;
    EXPECT_THROW((void)train_with_codes(f.data.train, f.book, f.dims, c), ValidationError);
    c = f.config(0.1);
    c.excluded_classes = {7};
    EXPECT_THROW((void)train_with_codes(f.data.train, f.book, f.dims, c), ValidationError);
    EXPECT_THROW((void)train_with_codes(f.data.train, data::generate_codebook(4, 5, 1, 0), f.dims, f.config(0.1)),
                 ShapeError);
    EXPECT_THROW((void)train_with_codes(f.data.train, f.book, {6, 8, 3}, f.config(0.1)), ShapeError);
}

}  // namespace
}  // namespace mnemo::train
