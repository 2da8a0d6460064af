#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "mnemo/core/binary_io.hpp"
#include "mnemo/nn/mlp.hpp"

namespace mnemo::nn {

// Checkpoint layout, all integers and doubles little-endian:
//
//   0    8 bytes   magic "MNEMOCKP"
//   8    u32       format version (1)
//   12   u32       number of layer dims D
//   16   D x u64   layer dims, input first
//   ..   u64       initialization seed
//   ..   u64       parameter count P
//   ..   P x f64   raw parameter values in layout order
inline constexpr std::string_view kCheckpointMagic = "MNEMOCKP";
inline constexpr std::uint32_t kCheckpointVersion = 1;

[[nodiscard]] inline std::vector<std::uint8_t> encode_checkpoint(const MlpModel& model) {
    io::Writer w;
    w.put_bytes(kCheckpointMagic);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(model.layer_dims().size()));
    for (std::size_t d : model.layer_dims()) {
        w.put(static_cast<std::uint64_t>(d));
    }
    w.put(model.seed());
    w.put(static_cast<std::uint64_t>(model.params().size()));
    for (double v : model.params().values()) {
        w.put(v);
    }
    return w.bytes();
}

[[nodiscard]] inline MlpModel decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
    io::Reader r(bytes, source);
    const auto magic = r.get_bytes(kCheckpointMagic.size(), "magic");
    if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic.begin())) {
        r.fail_at(0, "not a model checkpoint (bad magic)");
    }
    const auto version = r.get_le<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        r.fail_at(8, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto ndims = r.get_le<std::uint32_t>("dim count");
    if (ndims < 2 || ndims > 64) {
        r.fail_at(12, "implausible dim count " + std::to_string(ndims));
    }
    std::vector<std::size_t> dims;
    for (std::uint32_t i = 0; i < ndims; ++i) {
        dims.push_back(static_cast<std::size_t>(r.get_le<std::uint64_t>("layer dim")));
    }
    const auto seed = r.get_le<std::uint64_t>("seed");
    const std::size_t count_offset = r.offset();
    const auto count = r.get_le<std::uint64_t>("parameter count");
    const Layout layout = MlpModel::layout_for(dims);
    if (count != layout.total()) {
        r.fail_at(count_offset, "parameter count " + std::to_string(count) + " does not match dims (expected " +
                                    std::to_string(layout.total()) + ")");
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        v = r.get_le<double>("parameter values");
    }
    if (r.remaining() != 0) {
        r.fail("trailing bytes after parameters");
    }
    return MlpModel(std::move(dims), seed, ParameterVector(layout, std::move(values)));
}

inline void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_checkpoint(model));
}

[[nodiscard]] inline MlpModel load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return decode_checkpoint(bytes, path.string());
}

}  // namespace mnemo::nn
