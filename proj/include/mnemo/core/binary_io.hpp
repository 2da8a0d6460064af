#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mnemo/core/error.hpp"

namespace mnemo::io {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open '" + path.string() + "'");
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes to a sibling temp file, then renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ValidationError("cannot write '" + tmp.string() + "'");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw ValidationError("short write to '" + tmp.string() + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// Little-endian encoder.
class Writer {
public:
    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        static_assert(sizeof(T) == 4 || sizeof(T) == 8);
        U bits = std::bit_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
        }
    }

    void put_bytes(std::string_view raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }

    [[nodiscard]] const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked decoder; errors name the byte offset.
class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::string source)
        : bytes_(bytes), source_(std::move(source)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get_le(const char* what) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        need(sizeof(T), what);
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bits |= static_cast<U>(bytes_[offset_ + i]) << (8 * i);
        }
        offset_ += sizeof(T);
        return std::bit_cast<T>(bits);
    }

    std::uint32_t get_u32_be(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            v = (v << 8) | bytes_[offset_ + i];
        }
        offset_ += 4;
        return v;
    }

    std::span<const std::uint8_t> get_bytes(std::size_t n, const char* what) {
        need(n, what);
        auto out = bytes_.subspan(offset_, n);
        offset_ += n;
        return out;
    }

    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - offset_; }

    [[noreturn]] void fail(const std::string& message) const { fail_at(offset_, message); }

    [[noreturn]] void fail_at(std::size_t offset, const std::string& message) const {
        throw ParseError(source_ + ": " + message + " at byte offset " + std::to_string(offset));
    }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            fail(std::string("truncated while reading ") + what + " (need " + std::to_string(n) + " bytes, have " +
                 std::to_string(remaining()) + ")");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::string source_;
    std::size_t offset_ = 0;
};

}  // namespace mnemo::io
