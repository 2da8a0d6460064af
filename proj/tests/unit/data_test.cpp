#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "mnemo/core/binary_io.hpp"
#include "mnemo/data/codebook.hpp"
#include "mnemo/data/dataset.hpp"
#include "mnemo/data/mnist.hpp"
#include "mnemo/data/synthetic.hpp"
#include "test_support.hpp"

namespace mnemo::data {
namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> s));
    }
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels, std::uint32_t magic = 0x803) {
    std::vector<std::uint8_t> out;
    put_be(out, magic);
    put_be(out, count);
    put_be(out, rows);
    put_be(out, cols);
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels, std::uint32_t magic = 0x801) {
    std::vector<std::uint8_t> out;
    put_be(out, magic);
    put_be(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

std::string parse_error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

TEST(Idx, ParsesHandBuiltFiles) {
    const auto images = parse_idx_images(idx_images(2, 2, 2, {0, 255, 10, 20, 1, 2, 3, 4}), "img");
    EXPECT_EQ(images.count, 2u);
    EXPECT_EQ(images.rows * images.cols, 4u);
    EXPECT_EQ(images.pixels[1], 255);
    EXPECT_EQ(parse_idx_labels(idx_labels({3, 9}), "lbl"), (std::vector<int>{3, 9}));
}

TEST(Idx, WrongMagicNamesWhatWasFound) {
    const auto msg = parse_error_of([] { (void)parse_idx_images(idx_labels({1, 2}), "x.idx"); });
    EXPECT_NE(msg.find("label file"), std::string::npos) << msg;
    EXPECT_NE(msg.find("x.idx"), std::string::npos) << msg;
}

TEST(Idx, TruncationReportsOffset) {
    // header says 3 images of 4 bytes; only 1.5 images present -> fails where image 2 starts (16 + 4).
    const auto msg = parse_error_of([] { (void)parse_idx_images(idx_images(3, 2, 2, {1, 2, 3, 4, 5, 6}), "t"); });
    EXPECT_NE(msg.find("offset 20"), std::string::npos) << msg;
    const auto lmsg = parse_error_of([] {
        auto bytes = idx_labels({1, 2, 3});
        bytes.pop_back();
        (void)parse_idx_labels(bytes, "l");
    });
    EXPECT_NE(lmsg.find("offset 10"), std::string::npos) << lmsg;
    EXPECT_NE(parse_error_of([] { (void)parse_idx_images(std::vector<std::uint8_t>{0, 0, 8}, "h"); }).find("truncated"), std::string::npos);
}

TEST(Idx, RejectsBadLabelsAndTrailingBytes) {
    EXPECT_THROW((void)parse_idx_labels(idx_labels({1, 10}), "l"), ParseError);
    auto bytes = idx_images(1, 1, 1, {5});
    bytes.push_back(0);
    EXPECT_THROW((void)parse_idx_images(bytes, "i"), ParseError);
}

TEST(Idx, LoaderNormalizesAndChecksCounts) {
    const auto dir = std::filesystem::temp_directory_path() / "mnemo_idx_test";
    std::filesystem::remove_all(dir);
    io::write_file_atomic(dir / "img", idx_images(2, 1, 2, {0, 255, 255, 0}));
    io::write_file_atomic(dir / "lbl", idx_labels({1, 0}));
    io::write_file_atomic(dir / "lbl3", idx_labels({1, 0, 2}));
    const auto ds = load_mnist_idx(dir / "img", dir / "lbl", Split::train);
    EXPECT_NEAR(ds.normalization.mean, 0.5, 1e-15);
    EXPECT_NEAR(ds.normalization.stddev, 0.5, 1e-15);
    EXPECT_NEAR(ds.inputs(0, 0), -1.0, 1e-12);
    EXPECT_NEAR(ds.inputs(0, 1), 1.0, 1e-12);
    const auto with_stats = load_mnist_idx(dir / "img", dir / "lbl", Split::test, Normalization{0.0, 1.0});
    EXPECT_NEAR(with_stats.inputs(0, 1), 1.0, 1e-12);
    EXPECT_THROW((void)load_mnist_idx(dir / "img", dir / "lbl3", Split::train), ParseError);
    try {
        (void)load_mnist(dir);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("train-images-idx3-ubyte"), std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST(Dataset, SubsetsAndRestriction) {
    const auto ds = testing::toy_dataset(4, 3, 2, 0);
    EXPECT_EQ(ds.count_of(2), 3u);
    const auto r = ds.restricted_to(std::vector<int>{1, 3});
    EXPECT_EQ(r.size(), 6u);
    EXPECT_EQ(r.labels.front(), 1);
    EXPECT_TRUE(testing::bit_equal(nn::Matrix(r.inputs.row(0)), nn::Matrix(ds.inputs.row(3))));
    EXPECT_EQ(ds.of_class(0).size(), 3u);
}

TEST(Partition, ValidatesAndSorts) {
    const ClassPartition p(10, {3, 1});
    EXPECT_EQ(p.forget(), (std::vector<int>{1, 3}));
    EXPECT_EQ(p.remain().size(), 8u);
    EXPECT_TRUE(p.forgets(3));
    EXPECT_FALSE(p.forgets(0));
    EXPECT_THROW(ClassPartition(10, {}), ValidationError);
    EXPECT_THROW(ClassPartition(10, {10}), ValidationError);
    EXPECT_THROW(ClassPartition(10, {-1}), ValidationError);
    EXPECT_THROW(ClassPartition(10, {1, 1}), ValidationError);
    EXPECT_THROW(ClassPartition(2, {0, 1}), ValidationError);
    EXPECT_EQ(ClassPartition::single(10, 4).forget(), (std::vector<int>{4}));
}

TEST(Codebook, StandardNormalStatisticsAndDeterminism) {
    const auto book = generate_codebook(10, 784, 5, 3);
    EXPECT_EQ(book.total_codes(), 50u);
    double s = 0.0, ss = 0.0;
    std::size_t n = 0;
    for (int c = 0; c < 10; ++c) {
        for (Eigen::Index i = 0; i < book.codes(c).size(); ++i) {
            const double v = book.codes(c).data()[i];
            s += v;
            ss += v * v;
            ++n;
        }
    }
    const double mean = s / static_cast<double>(n);
    EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(ss / static_cast<double>(n) - mean * mean, 1.0, 0.03);
    EXPECT_TRUE(book == generate_codebook(10, 784, 5, 3));
    EXPECT_FALSE(book == generate_codebook(10, 784, 5, 4));
}

TEST(Codebook, AsDatasetIsClassMajor) {
    const auto book = generate_codebook(3, 4, 2, 0);
    const auto ds = book.as_dataset(std::vector<int>{2, 0});
    EXPECT_EQ(ds.labels, (std::vector<int>{2, 2, 0, 0}));
    EXPECT_TRUE(testing::bit_equal(nn::Matrix(ds.inputs.row(1)), nn::Matrix(book.codes(2).row(1))));
    EXPECT_EQ(book.as_dataset().size(), 6u);
}

TEST(Codebook, FileRoundTripAndCorruption) {
    const auto book = generate_codebook(3, 5, 2, 9);
    const auto bytes = encode_codebook(book);
    EXPECT_TRUE(decode_codebook(bytes, "b") == book);
    EXPECT_EQ(decode_codebook(bytes, "b").seed(), 9u);
    auto cut = bytes;
    cut.resize(cut.size() - 8);
    EXPECT_THROW((void)decode_codebook(cut, "b"), ParseError);
    auto bad = bytes;
    bad[3] = '?';
    EXPECT_THROW((void)decode_codebook(bad, "b"), ParseError);
}

TEST(Synthetic, DeterministicAndBalanced) {
    const auto a = make_synthetic(4, 10, 3, 0.5, 1);
    const auto b = make_synthetic(4, 10, 3, 0.5, 1);
    EXPECT_TRUE(testing::bit_equal(a.train.inputs, b.train.inputs));
    EXPECT_FALSE(testing::bit_equal(a.train.inputs, a.test.inputs));
    EXPECT_EQ(a.train.size(), 40u);
    EXPECT_EQ(a.test.count_of(3), 10u);
    EXPECT_THROW((void)make_synthetic(0, 10, 3, 0.5, 1), ValidationError);
}

}  // namespace
}  // namespace mnemo::data
