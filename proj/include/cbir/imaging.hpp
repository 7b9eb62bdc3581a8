#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbir {

/// Canonical working resolution every image is resized to before extraction.
inline constexpr int kCanonicalWidth = 384;
inline constexpr int kCanonicalHeight = 256;

class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Decoded 8-bit three-channel raster, row-major.
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height, Rgb fill = {});
    RgbImage(int width, int height, std::vector<Rgb> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    const Rgb& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<const Rgb> pixels() const { return pixels_; }
    std::span<Rgb> pixels() { return pixels_; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

enum class ColorSpace { Hsv, YCbCr, Gray };

/// Real-valued image stored as one or three planes.
///
/// HSV planes hold H in degrees [0, 360), S and V in [0, 1]. YCbCr and gray
/// planes are normalized to [0, 1].
class PlanarImage {
public:
    PlanarImage() = default;
    PlanarImage(int width, int height, ColorSpace space);
    /// Wraps an existing gray plane; values are expected in [0, 1].
    static PlanarImage gray(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    ColorSpace space() const { return space_; }
    int channels() const { return static_cast<int>(planes_.size()); }

    std::span<const double> plane(int c) const { return planes_[c]; }
    std::span<double> plane(int c) { return planes_[c]; }

    double at(int c, int x, int y) const {
        return planes_[c][static_cast<std::size_t>(y) * width_ + x];
    }
    double& at(int c, int x, int y) {
        return planes_[c][static_cast<std::size_t>(y) * width_ + x];
    }

    friend bool operator==(const PlanarImage&, const PlanarImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    ColorSpace space_ = ColorSpace::Gray;
    std::vector<std::vector<double>> planes_;
};

/// Decodes a PNG or JPEG stream to 8-bit RGB. Gray sources are replicated to
/// all three channels and alpha is dropped.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
RgbImage read_image(const std::string& path);

/// Encodes as JPEG (quality 0-100) or PNG.
std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality = 90);
std::vector<std::uint8_t> encode_png(const RgbImage& img);

/// Bilinear resampling with pixel-center alignment. Same-size input is copied.
RgbImage resize_bilinear(const RgbImage& img, int width, int height);
RgbImage resize_canonical(const RgbImage& img);

PlanarImage rgb_to_hsv(const RgbImage& img);
PlanarImage rgb_to_ycbcr(const RgbImage& img);
PlanarImage rgb_to_gray(const RgbImage& img);

// Single-pixel forms of the conversions above.
std::array<double, 3> rgb_to_hsv(Rgb px);
std::array<double, 3> rgb_to_ycbcr(Rgb px);
double rgb_to_gray(Rgb px);

/// Analytic inverse of the hexcone conversion, on the 0-255 scale (unrounded).
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

}  // namespace cbir
