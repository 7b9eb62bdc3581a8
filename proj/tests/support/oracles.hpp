#pragma once

// Naive reference implementations used only by tests. They follow the
// textbook formulas literally and share no code with the library.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace cbir::oracle {

struct Moments {
    double m[4][4] = {};   // raw
    double mu[4][4] = {};  // central, by expansion of raw moments
    double n[4][4] = {};   // normalized
    double pc = 0.0;
    double qc = 0.0;
};

/// values is row-major width x height; p = column, q = row.
inline Moments moments(const std::vector<double>& values, int width, int height) {
    Moments r;
    for (int x = 0; x <= 3; ++x) {
        for (int y = 0; x + y <= 3; ++y) {
            double s = 0.0;
            for (int p = 0; p < width; ++p) {
                for (int q = 0; q < height; ++q) {
                    s += std::pow(p, x) * std::pow(q, y) * values[q * width + p];
                }
            }
            r.m[x][y] = s;
        }
    }
    const auto& m = r.m;
    r.pc = m[1][0] / m[0][0];
    r.qc = m[0][1] / m[0][0];
    const double pc = r.pc, qc = r.qc;

    r.mu[0][0] = m[0][0];
    r.mu[1][0] = 0.0;
    r.mu[0][1] = 0.0;
    r.mu[2][0] = m[2][0] - pc * m[1][0];
    r.mu[0][2] = m[0][2] - qc * m[0][1];
    r.mu[1][1] = m[1][1] - pc * m[0][1];
    r.mu[3][0] = m[3][0] - 3 * pc * m[2][0] + 2 * pc * pc * m[1][0];
    r.mu[0][3] = m[0][3] - 3 * qc * m[0][2] + 2 * qc * qc * m[0][1];
    r.mu[2][1] = m[2][1] - 2 * pc * m[1][1] - qc * m[2][0] + 2 * pc * pc * m[0][1];
    r.mu[1][2] = m[1][2] - 2 * qc * m[1][1] - pc * m[0][2] + 2 * qc * qc * m[1][0];

    for (int x = 0; x <= 3; ++x) {
        for (int y = 0; x + y <= 3; ++y) {
            r.n[x][y] = r.mu[x][y] / std::pow(r.mu[0][0], (x + y + 2) / 2.0);
        }
    }
    return r;
}

/// Hu's seven invariants, written out term by term.
inline std::array<double, 7> hu(const Moments& mo) {
    const auto& n = mo.n;
    const double n20 = n[2][0], n02 = n[0][2], n11 = n[1][1];
    const double n30 = n[3][0], n03 = n[0][3], n21 = n[2][1], n12 = n[1][2];
    std::array<double, 7> h{};
    h[0] = n20 + n02;
    h[1] = std::pow(n20 - n02, 2) + 4 * std::pow(n11, 2);
    h[2] = std::pow(n30 - 3 * n12, 2) + std::pow(3 * n21 - n03, 2);
    h[3] = std::pow(n30 + n12, 2) + std::pow(n21 + n03, 2);
    h[4] = (n30 - 3 * n12) * (n30 + n12) * (std::pow(n30 + n12, 2) - 3 * std::pow(n21 + n03, 2)) +
           (3 * n21 - n03) * (n21 + n03) * (3 * std::pow(n30 + n12, 2) - std::pow(n21 + n03, 2));
    h[5] = (n20 - n02) * (std::pow(n30 + n12, 2) - std::pow(n21 + n03, 2)) +
           4 * n11 * (n30 + n12) * (n21 + n03);
    h[6] = (3 * n21 - n03) * (n30 + n12) * (std::pow(n30 + n12, 2) - 3 * std::pow(n21 + n03, 2)) -
           (n30 - 3 * n12) * (n21 + n03) * (3 * std::pow(n30 + n12, 2) - std::pow(n21 + n03, 2));
    return h;
}

struct ChannelStats {
    double mean;
    double stddev;
    double skewness;
};

/// Power-sum form: E[X], sqrt(E[X^2] - E^2), cbrt(E[X^3] - 3E E[X^2] + 2E^3).
inline ChannelStats channel(const std::vector<double>& v) {
    long double s1 = 0, s2 = 0, s3 = 0;
    for (double x : v) {
        s1 += x;
        s2 += static_cast<long double>(x) * x;
        s3 += static_cast<long double>(x) * x * x;
    }
    const long double n = static_cast<long double>(v.size());
    const long double e = s1 / n;
    const long double e2 = s2 / n;
    const long double e3 = s3 / n;
    long double var = e2 - e * e;
    if (var < 0) var = 0;
    const long double third = e3 - 3 * e * e2 + 2 * e * e * e;
    return {static_cast<double>(e), static_cast<double>(std::sqrt(var)), static_cast<double>(std::cbrt(third))};
}

/// Brute-force L1 distance.
inline double l1(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
    return s;
}

}  // namespace cbir::oracle
