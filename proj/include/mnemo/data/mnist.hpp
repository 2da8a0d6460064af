#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mnemo/core/binary_io.hpp"
#include "mnemo/data/dataset.hpp"

namespace mnemo::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // 2049

/// Raw contents of an IDX image file.
struct IdxImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols
};

inline std::string describe_magic(std::uint32_t magic) {
    if (magic == kIdxImagesMagic) {
        return "an image file (magic 2051)";
    }
    if (magic == kIdxLabelsMagic) {
        return "a label file (magic 2049)";
    }
    return "magic " + std::to_string(magic);
}

[[nodiscard]] inline IdxImages parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& source) {
    io::Reader r(bytes, source);
    const auto magic = r.get_u32_be("magic");
    if (magic != kIdxImagesMagic) {
        r.fail_at(0, "expected an image file (magic 2051), found " + describe_magic(magic));
    }
    IdxImages out;
    out.count = r.get_u32_be("image count");
    out.rows = r.get_u32_be("row count");
    out.cols = r.get_u32_be("column count");
    const std::size_t image_bytes = out.rows * out.cols;
    if (image_bytes == 0) {
        r.fail_at(8, "image dimensions must be positive");
    }
    const std::size_t available = r.remaining() / image_bytes;
    if (available < out.count) {
        r.fail_at(16 + available * image_bytes, "truncated: header declares " + std::to_string(out.count) +
                                                    " images but only " + std::to_string(available) + " are present");
    }
    const auto pixels = r.get_bytes(out.count * image_bytes, "pixels");
    out.pixels.assign(pixels.begin(), pixels.end());
    if (r.remaining() != 0) {
        r.fail("trailing bytes after the declared images");
    }
    return out;
}

[[nodiscard]] inline std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& source) {
    io::Reader r(bytes, source);
    const auto magic = r.get_u32_be("magic");
    if (magic != kIdxLabelsMagic) {
        r.fail_at(0, "expected a label file (magic 2049), found " + describe_magic(magic));
    }
    const std::size_t count = r.get_u32_be("label count");
    if (r.remaining() < count) {
        r.fail_at(8 + r.remaining(), "truncated: header declares " + std::to_string(count) + " labels but only " +
                                         std::to_string(r.remaining()) + " are present");
    }
    const auto raw = r.get_bytes(count, "labels");
    std::vector<int> labels;
    labels.reserve(count);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] > 9) {
            r.fail_at(8 + i, "label " + std::to_string(raw[i]) + " outside 0-9");
        }
        labels.push_back(raw[i]);
    }
    if (r.remaining() != 0) {
        r.fail("trailing bytes after the declared labels");
    }
    return labels;
}

/// Mean and standard deviation of pixel/255 over every pixel of the split.
[[nodiscard]] inline Normalization pixel_statistics(const IdxImages& images) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::uint8_t p : images.pixels) {
        const double v = p / 255.0;
        sum += v;
        sum_sq += v * v;
    }
    const auto n = static_cast<double>(images.pixels.size());
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0);
    return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

/// Loads an IDX image/label pair. Pixels are scaled to [0,1] and standardized
/// with `stats`; when absent, the statistics of this split are used (the train case).
[[nodiscard]] inline LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                                                   const std::filesystem::path& labels_path, Split split,
                                                   std::optional<Normalization> stats = std::nullopt) {
    const auto image_bytes = io::read_file(images_path);
    const auto label_bytes = io::read_file(labels_path);
    const IdxImages images = parse_idx_images(image_bytes, images_path.string());
    std::vector<int> labels = parse_idx_labels(label_bytes, labels_path.string());
    if (labels.size() != images.count) {
        throw ParseError(labels_path.string() + ": label count " + std::to_string(labels.size()) +
                         " does not match image count " + std::to_string(images.count) + " at byte offset 4");
    }
    const Normalization norm = stats.value_or(pixel_statistics(images));
    const std::size_t features = images.rows * images.cols;
    LabeledDataset out{Matrix(static_cast<Eigen::Index>(images.count), static_cast<Eigen::Index>(features)),
                       std::move(labels), 10, split, norm};
    double* dst = out.inputs.data();
    for (std::size_t i = 0; i < images.pixels.size(); ++i) {
        dst[i] = (images.pixels[i] / 255.0 - norm.mean) / norm.stddev;
    }
    return out;
}

struct TrainTestPair {
    LabeledDataset train;
    LabeledDataset test;
};

/// Standard file names under `dir`; the test split uses train statistics.
[[nodiscard]] inline TrainTestPair load_mnist(const std::filesystem::path& dir) {
    for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                             "t10k-labels-idx1-ubyte"}) {
        if (!std::filesystem::exists(dir / name)) {
            throw ValidationError("MNIST file not found: " + (dir / name).string());
        }
    }
    auto train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", Split::train);
    auto test = load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", Split::test,
                               train.normalization);
    return {std::move(train), std::move(test)};
}

}  // namespace mnemo::data
