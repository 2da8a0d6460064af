#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "mnemo/core/binary_io.hpp"
#include "mnemo/core/rng.hpp"
#include "mnemo/data/dataset.hpp"

namespace mnemo::data {

/// Class-specific random signals. codes(c) holds codes_per_class rows of
/// feature_dim standard-normal values in normalized-input units.
class MnemonicCodebook {
public:
    MnemonicCodebook() = default;

    MnemonicCodebook(std::vector<Matrix> codes, std::uint64_t seed) : codes_(std::move(codes)), seed_(seed) {
        require(!codes_.empty(), "codebook needs at least one class");
        for (const auto& m : codes_) {
            require<ShapeError>(m.rows() == codes_.front().rows() && m.cols() == codes_.front().cols() && m.rows() > 0,
                                "every class needs the same positive number of equally sized codes");
        }
    }

    [[nodiscard]] std::size_t num_classes() const noexcept { return codes_.size(); }
    [[nodiscard]] std::size_t codes_per_class() const noexcept { return static_cast<std::size_t>(codes_.front().rows()); }
    [[nodiscard]] std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(codes_.front().cols()); }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::size_t total_codes() const noexcept { return num_classes() * codes_per_class(); }

    [[nodiscard]] const Matrix& codes(int cls) const {
        require(cls >= 0 && static_cast<std::size_t>(cls) < codes_.size(),
                "class " + std::to_string(cls) + " is not in the codebook");
        return codes_[static_cast<std::size_t>(cls)];
    }

    [[nodiscard]] bool covers(int cls) const noexcept {
        return cls >= 0 && static_cast<std::size_t>(cls) < codes_.size();
    }

    /// The codes of `classes` as a labeled set, class-major.
    [[nodiscard]] LabeledDataset as_dataset(std::span<const int> classes) const {
        const auto per = static_cast<Eigen::Index>(codes_per_class());
        LabeledDataset out{Matrix(static_cast<Eigen::Index>(classes.size()) * per, static_cast<Eigen::Index>(feature_dim())),
                           {}, num_classes(), Split::train, Normalization{}};
        Eigen::Index row = 0;
        for (int c : classes) {
            out.inputs.middleRows(row, per) = codes(c);
            out.labels.insert(out.labels.end(), static_cast<std::size_t>(per), c);
            row += per;
        }
        return out;
    }

    [[nodiscard]] LabeledDataset as_dataset() const {
        std::vector<int> all(num_classes());
        for (std::size_t c = 0; c < all.size(); ++c) {
            all[c] = static_cast<int>(c);
        }
        return as_dataset(all);
    }

    bool operator==(const MnemonicCodebook& other) const {
        if (seed_ != other.seed_ || codes_.size() != other.codes_.size()) {
            return false;
        }
        for (std::size_t c = 0; c < codes_.size(); ++c) {
            if (codes_[c].rows() != other.codes_[c].rows() || codes_[c].cols() != other.codes_[c].cols() ||
                codes_[c] != other.codes_[c]) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<Matrix> codes_;
    std::uint64_t seed_ = 0;
};

/// i.i.d. N(0,1) codes; class-major, code-major, feature-minor draw order.
[[nodiscard]] inline MnemonicCodebook generate_codebook(std::size_t num_classes, std::size_t feature_dim,
                                                        std::size_t codes_per_class, std::uint64_t seed) {
    require(num_classes > 0 && feature_dim > 0 && codes_per_class > 0, "codebook counts must be positive");
    Rng rng(derive_seed(seed, "codebook"));
    NormalSampler normal;
    std::vector<Matrix> codes;
    codes.reserve(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        Matrix m(static_cast<Eigen::Index>(codes_per_class), static_cast<Eigen::Index>(feature_dim));
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = normal(rng);
        }
        codes.push_back(std::move(m));
    }
    return MnemonicCodebook(std::move(codes), seed);
}

// Codebook file, little-endian:
//
//   0    8 bytes   magic "MNEMOCBK"
//   8    u32       format version (1)
//   12   u64       generation seed
//   20   u32       number of classes C
//   24   u32       codes per class K
//   28   u64       feature dim D
//   36   C*K*D f64 values, class-major, then code, then feature
inline constexpr std::string_view kCodebookMagic = "MNEMOCBK";
inline constexpr std::uint32_t kCodebookVersion = 1;

[[nodiscard]] inline std::vector<std::uint8_t> encode_codebook(const MnemonicCodebook& book) {
    io::Writer w;
    w.put_bytes(kCodebookMagic);
    w.put(kCodebookVersion);
    w.put(book.seed());
    w.put(static_cast<std::uint32_t>(book.num_classes()));
    w.put(static_cast<std::uint32_t>(book.codes_per_class()));
    w.put(static_cast<std::uint64_t>(book.feature_dim()));
    for (std::size_t c = 0; c < book.num_classes(); ++c) {
        const Matrix& m = book.codes(static_cast<int>(c));
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            w.put(m.data()[i]);
        }
    }
    return w.bytes();
}

[[nodiscard]] inline MnemonicCodebook decode_codebook(std::span<const std::uint8_t> bytes, const std::string& source) {
    io::Reader r(bytes, source);
    const auto magic = r.get_bytes(kCodebookMagic.size(), "magic");
    if (!std::equal(magic.begin(), magic.end(), kCodebookMagic.begin())) {
        r.fail_at(0, "not a codebook (bad magic)");
    }
    const auto version = r.get_le<std::uint32_t>("version");
    if (version != kCodebookVersion) {
        r.fail_at(8, "unsupported codebook version " + std::to_string(version));
    }
    const auto seed = r.get_le<std::uint64_t>("seed");
    const auto classes = r.get_le<std::uint32_t>("class count");
    const auto per = r.get_le<std::uint32_t>("codes per class");
    const auto dim = r.get_le<std::uint64_t>("feature dim");
    if (classes == 0 || per == 0 || dim == 0) {
        r.fail_at(20, "codebook counts must be positive");
    }
    if (r.remaining() != static_cast<std::size_t>(classes) * per * dim * sizeof(double)) {
        r.fail("payload size does not match header (" + std::to_string(r.remaining()) + " bytes remain)");
    }
    std::vector<Matrix> codes;
    for (std::uint32_t c = 0; c < classes; ++c) {
        Matrix m(static_cast<Eigen::Index>(per), static_cast<Eigen::Index>(dim));
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = r.get_le<double>("code values");
        }
        codes.push_back(std::move(m));
    }
    return MnemonicCodebook(std::move(codes), seed);
}

inline void save_codebook(const MnemonicCodebook& book, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_codebook(book));
}

[[nodiscard]] inline MnemonicCodebook load_codebook(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return decode_codebook(bytes, path.string());
}

}  // namespace mnemo::data
