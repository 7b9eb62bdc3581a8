#include "cbir/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cbir {

HsvHistogram hsv_histogram(const PlanarImage& hsv) {
    if (hsv.space() != ColorSpace::Hsv) throw std::invalid_argument("hsv_histogram needs an HSV image");

    std::array<std::size_t, kHistogramBins> counts{};
    const auto h = hsv.plane(0);
    const auto s = hsv.plane(1);
    const auto v = hsv.plane(2);
    for (std::size_t i = 0; i < h.size(); ++i) {
        double hue = h[i];
        if (hue >= 360.0) hue -= 360.0;
        const auto h_bin = static_cast<std::size_t>(
            std::clamp(std::floor(hue / 360.0 * kHueBins), 0.0, static_cast<double>(kHueBins - 1)));
        const auto s_bin = static_cast<std::size_t>(std::clamp(std::floor(s[i] * 2.0), 0.0, 1.0));
        const auto v_bin = static_cast<std::size_t>(std::clamp(std::floor(v[i] * 2.0), 0.0, 1.0));
        ++counts[histogram_index(h_bin, s_bin, v_bin)];
    }

    HsvHistogram out{};
    const auto total = static_cast<double>(h.size());
    for (std::size_t b = 0; b < kHistogramBins; ++b) out[b] = static_cast<double>(counts[b]) / total;
    return out;
}

ChannelMoments channel_moments(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("channel_moments needs at least one value");

    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return {*lo, 0.0, 0.0};

    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;

    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    return {mean, std::sqrt(m2 / n), std::cbrt(m3 / n)};
}

ColorMoments color_moments(const PlanarImage& ycbcr) {
    if (ycbcr.space() != ColorSpace::YCbCr) throw std::invalid_argument("color_moments needs a YCbCr image");
    return {channel_moments(ycbcr.plane(0)), channel_moments(ycbcr.plane(1)), channel_moments(ycbcr.plane(2))};
}

double moment_distance(const ColorMoments& a, const ColorMoments& b, const MomentWeights& weights) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) {
            throw NegativeWeight("moment weight " + std::to_string(i) + " is negative");
        }
    }
    double d = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        d += weights[3 * c + 0] * std::fabs(a[c].mean - b[c].mean);
        d += weights[3 * c + 1] * std::fabs(a[c].stddev - b[c].stddev);
        d += weights[3 * c + 2] * std::fabs(a[c].skewness - b[c].skewness);
    }
    return d;
}

ImageMoments central_moments_normalized(const PlanarImage& gray) {
    if (gray.space() != ColorSpace::Gray) throw std::invalid_argument("moments need a grayscale image");

    const int w = gray.width();
    const int h = gray.height();
    const auto px = gray.plane(0);

    // Per-row power sums in the column coordinate, reused by both passes.
    ImageMoments out;
    for (int q = 0; q < h; ++q) {
        std::array<double, 4> row{};
        for (int p = 0; p < w; ++p) {
            const double v = px[static_cast<std::size_t>(q) * w + p];
            const double pp = p;
            row[0] += v;
            row[1] += pp * v;
            row[2] += pp * pp * v;
            row[3] += pp * pp * pp * v;
        }
        const double qq = q;
        double qpow = 1.0;
        for (int y = 0; y <= 3; ++y) {
            for (int x = 0; x + y <= 3; ++x) out.raw[x][y] += qpow * row[x];
            qpow *= qq;
        }
    }

    const double m00 = out.raw[0][0];
    if (!(m00 > 0.0)) throw ZeroMass();
    out.pc = out.raw[1][0] / m00;
    out.qc = out.raw[0][1] / m00;

    for (int q = 0; q < h; ++q) {
        std::array<double, 4> row{};
        for (int p = 0; p < w; ++p) {
            const double v = px[static_cast<std::size_t>(q) * w + p];
            const double dp = p - out.pc;
            row[0] += v;
            row[1] += dp * v;
            row[2] += dp * dp * v;
            row[3] += dp * dp * dp * v;
        }
        const double dq = q - out.qc;
        double qpow = 1.0;
        for (int y = 0; y <= 3; ++y) {
            for (int x = 0; x + y <= 3; ++x) out.central[x][y] += qpow * row[x];
            qpow *= dq;
        }
    }
    // First-order central moments vanish by construction of the centroid.
    out.central[1][0] = 0.0;
    out.central[0][1] = 0.0;

    const double mu00 = out.central[0][0];
    for (int x = 0; x <= 3; ++x) {
        for (int y = 0; x + y <= 3; ++y) {
            const double a = (x + y + 2) / 2.0;
            out.normalized[x][y] = out.central[x][y] / std::pow(mu00, a);
        }
    }
    return out;
}

HuVector hu_invariants(const ImageMoments& m) {
    const double n20 = m.n(2, 0), n02 = m.n(0, 2), n11 = m.n(1, 1);
    const double n30 = m.n(3, 0), n03 = m.n(0, 3), n21 = m.n(2, 1), n12 = m.n(1, 2);

    const double a = n30 + n12;
    const double b = n21 + n03;
    const double c = n30 - 3.0 * n12;
    const double d = 3.0 * n21 - n03;

    HuVector hu{};
    hu[0] = n20 + n02;
    hu[1] = (n20 - n02) * (n20 - n02) + 4.0 * n11 * n11;
    hu[2] = c * c + d * d;
    hu[3] = a * a + b * b;
    hu[4] = c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b);
    hu[5] = (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b;
    hu[6] = d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b);
    return hu;
}

HuVector hu_invariants(const PlanarImage& gray) {
    try {
        return hu_invariants(central_moments_normalized(gray));
    } catch (const ZeroMass&) {
        return HuVector{};
    }
}

Descriptor fuse(const HsvHistogram& histogram, const ColorMoments& moments, const HuVector& hu) {
    Descriptor out;
    std::size_t i = 0;
    for (double v : histogram) out[i++] = v;
    for (const auto& ch : moments) {
        out[i++] = ch.mean;
        out[i++] = ch.stddev;
    }
    for (double v : hu) out[i++] = v;
    return out;
}

Descriptor extract_features(const RgbImage& img) {
    return fuse(hsv_histogram(rgb_to_hsv(img)), color_moments(rgb_to_ycbcr(img)), hu_invariants(rgb_to_gray(img)));
}

Descriptor extract_descriptor(const RgbImage& img) {
    return extract_features(resize_canonical(img));
}

}  // namespace cbir
