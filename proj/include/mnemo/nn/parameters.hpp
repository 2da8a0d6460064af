#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mnemo/core/error.hpp"

namespace mnemo::nn {

/// One named tensor inside a flat parameter array.
struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
    std::vector<std::size_t> shape;

    bool operator==(const Segment&) const = default;
};

/// Ordered, contiguous segmentation of a flat array.
class Layout {
public:
    Layout() = default;

    /// Builds offsets from (name, shape) pairs in order.
    static Layout from_shapes(const std::vector<std::pair<std::string, std::vector<std::size_t>>>& tensors) {
        std::vector<Segment> segments;
        std::size_t offset = 0;
        for (const auto& [name, shape] : tensors) {
            const std::size_t length =
                std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
            segments.push_back(Segment{name, offset, length, shape});
            offset += length;
        }
        return Layout(std::move(segments));
    }

    explicit Layout(std::vector<Segment> segments) : segments_(std::move(segments)) { validate(); }

    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }
    [[nodiscard]] std::size_t size() const noexcept { return segments_.size(); }
    [[nodiscard]] const Segment& operator[](std::size_t i) const { return segments_.at(i); }

    [[nodiscard]] std::size_t total() const noexcept {
        return segments_.empty() ? 0 : segments_.back().offset + segments_.back().length;
    }

    [[nodiscard]] std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            if (segments_[i].name == name) {
                return i;
            }
        }
        throw ValidationError("no segment named '" + name + "'");
    }

    bool operator==(const Layout&) const = default;

private:
    void validate() const {
        std::unordered_set<std::string> names;
        std::size_t expected_offset = 0;
        for (const auto& s : segments_) {
            require<ShapeError>(names.insert(s.name).second, "duplicate segment name '" + s.name + "'");
            require<ShapeError>(s.offset == expected_offset,
                                "segment '" + s.name + "' is not contiguous with its predecessor");
            const std::size_t product =
                std::accumulate(s.shape.begin(), s.shape.end(), std::size_t{1}, std::multiplies<>());
            require<ShapeError>(product == s.length, "segment '" + s.name + "' shape does not match its length");
            expected_offset += s.length;
        }
    }

    std::vector<Segment> segments_;
};

/// Flat real array carrying a Layout. The tag keeps parameters, gradients
/// and Fisher diagonals from being mixed up at compile time.
template <class Tag>
class SegmentedVector {
public:
    SegmentedVector() = default;

    explicit SegmentedVector(Layout layout) : layout_(std::move(layout)), values_(layout_.total(), 0.0) {}

    SegmentedVector(Layout layout, std::vector<double> values)
        : layout_(std::move(layout)), values_(std::move(values)) {
        require<ShapeError>(values_.size() == layout_.total(), "value count does not match layout");
    }

    [[nodiscard]] const Layout& layout() const noexcept { return layout_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<double>& raw() const noexcept { return values_; }

    [[nodiscard]] std::span<double> segment(std::size_t i) {
        const auto& s = layout_[i];
        return std::span<double>(values_).subspan(s.offset, s.length);
    }
    [[nodiscard]] std::span<const double> segment(std::size_t i) const {
        const auto& s = layout_[i];
        return std::span<const double>(values_).subspan(s.offset, s.length);
    }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] bool all_finite() const noexcept {
        for (double v : values_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    /// Same segmentation, for combining vectors of different kinds.
    template <class Other>
    [[nodiscard]] bool aligned_with(const SegmentedVector<Other>& other) const noexcept {
        return layout_ == other.layout();
    }

    bool operator==(const SegmentedVector&) const = default;

private:
    Layout layout_;
    std::vector<double> values_;
};

struct ParameterTag {};
struct GradientTag {};

using ParameterVector = SegmentedVector<ParameterTag>;
using GradientVector = SegmentedVector<GradientTag>;

template <class A, class B>
void require_aligned(const SegmentedVector<A>& a, const SegmentedVector<B>& b, const char* what) {
    require<ShapeError>(a.aligned_with(b), std::string(what) + ": segmentation mismatch");
}

}  // namespace mnemo::nn
