#pragma once

#include "cbir/imaging.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace cbir {

// Fused descriptor layout: [histogram | color moments | Hu invariants].
inline constexpr std::size_t kHistogramBins = 128;
inline constexpr std::size_t kMomentValues = 6;
inline constexpr std::size_t kHuValues = 7;
inline constexpr std::size_t kDescriptorSize = kHistogramBins + kMomentValues + kHuValues;

inline constexpr std::size_t kHueBins = 32;
inline constexpr std::size_t kSaturationBins = 2;
inline constexpr std::size_t kValueBins = 2;

enum class Segment { Histogram = 0, Moments = 1, Hu = 2 };

struct SegmentRange {
    std::size_t begin;
    std::size_t end;
};

constexpr SegmentRange segment_range(Segment s) {
    switch (s) {
        case Segment::Histogram: return {0, kHistogramBins};
        case Segment::Moments: return {kHistogramBins, kHistogramBins + kMomentValues};
        case Segment::Hu: return {kHistogramBins + kMomentValues, kDescriptorSize};
    }
    return {0, 0};
}

inline constexpr std::array<Segment, 3> kSegments = {Segment::Histogram, Segment::Moments, Segment::Hu};

class ZeroMass : public std::domain_error {
public:
    ZeroMass() : std::domain_error("image has zero total intensity") {}
};

class NegativeWeight : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Normalized 32x2x2 HSV histogram, flat index h*4 + s*2 + v.
using HsvHistogram = std::array<double, kHistogramBins>;

constexpr std::size_t histogram_index(std::size_t h_bin, std::size_t s_bin, std::size_t v_bin) {
    return h_bin * (kSaturationBins * kValueBins) + s_bin * kValueBins + v_bin;
}

HsvHistogram hsv_histogram(const PlanarImage& hsv);

struct ChannelMoments {
    double mean = 0.0;
    double stddev = 0.0;
    double skewness = 0.0;  // signed cube root of the third central moment
};

/// Mean, population standard deviation and skewness of Y, Cb, Cr.
using ColorMoments = std::array<ChannelMoments, 3>;

ChannelMoments channel_moments(std::span<const double> values);
ColorMoments color_moments(const PlanarImage& ycbcr);

/// Per-channel weights laid out as (mean, stddev, skewness) for Y, Cb, Cr.
using MomentWeights = std::array<double, 9>;
inline constexpr MomentWeights kUnitMomentWeights = {1, 1, 1, 1, 1, 1, 1, 1, 1};

double moment_distance(const ColorMoments& a, const ColorMoments& b,
                       const MomentWeights& weights = kUnitMomentWeights);

/// Raw, central and scale-normalized moments up to third order, with the
/// intensity centroid. Coordinates: p = column, q = row, origin top-left.
struct ImageMoments {
    using Table = std::array<std::array<double, 4>, 4>;  // [x][y], valid for x + y <= 3

    Table raw{};
    Table central{};
    Table normalized{};
    double pc = 0.0;
    double qc = 0.0;

    double m(int x, int y) const { return raw[x][y]; }
    double mu(int x, int y) const { return central[x][y]; }
    double n(int x, int y) const { return normalized[x][y]; }
};

/// Throws ZeroMass when the image sums to zero.
ImageMoments central_moments_normalized(const PlanarImage& gray);

using HuVector = std::array<double, 7>;

HuVector hu_invariants(const ImageMoments& moments);
/// All-black input yields the zero vector.
HuVector hu_invariants(const PlanarImage& gray);

class Descriptor {
public:
    Descriptor() { values_.fill(0.0); }
    explicit Descriptor(const std::array<double, kDescriptorSize>& values) : values_(values) {}

    static constexpr std::size_t size() { return kDescriptorSize; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    std::span<const double> segment(Segment s) const {
        const auto r = segment_range(s);
        return std::span<const double>(values_).subspan(r.begin, r.end - r.begin);
    }

    friend bool operator==(const Descriptor&, const Descriptor&) = default;

private:
    std::array<double, kDescriptorSize> values_;
};

Descriptor fuse(const HsvHistogram& histogram, const ColorMoments& moments, const HuVector& hu);

/// Features of an image at its current resolution (no resize).
Descriptor extract_features(const RgbImage& img);

/// Resize to the canonical resolution, then extract features.
Descriptor extract_descriptor(const RgbImage& img);

}  // namespace cbir
