#include "cbir/imaging.hpp"

#include <opencv2/core.hpp>
#include <opencv2/core/utils/logger.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>

namespace cbir {

namespace {

void check_dims(int width, int height) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("image dimensions must be positive, got " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }
}

enum class Format { Png, Jpeg, Unknown };

Format sniff(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t png_sig[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= sizeof(png_sig) && std::equal(std::begin(png_sig), std::end(png_sig), bytes.begin())) {
        return Format::Png;
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        return Format::Jpeg;
    }
    return Format::Unknown;
}

// libjpeg recovers from a missing tail by padding with gray, so a truncated
// stream has to be caught before it reaches the decoder.
bool has_jpeg_eoi(std::span<const std::uint8_t> bytes) {
    for (std::size_t i = bytes.size(); i >= 2; --i) {
        if (bytes[i - 2] == 0xFF && bytes[i - 1] == 0xD9) return true;
    }
    return false;
}

void silence_opencv() {
    static std::once_flag once;
    std::call_once(once, [] { cv::utils::logging::setLogLevel(cv::utils::logging::LOG_LEVEL_SILENT); });
}

cv::Mat to_bgr_mat(const RgbImage& img) {
    cv::Mat mat(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width(); ++x) {
            const Rgb px = img.at(x, y);
            row[3 * x + 0] = px.b;
            row[3 * x + 1] = px.g;
            row[3 * x + 2] = px.r;
        }
    }
    return mat;
}

std::vector<std::uint8_t> encode(const RgbImage& img, const std::string& ext, const std::vector<int>& params) {
    silence_opencv();
    std::vector<std::uint8_t> out;
    if (!cv::imencode(ext, to_bgr_mat(img), out, params)) {
        throw std::runtime_error("failed to encode image as " + ext);
    }
    return out;
}

std::uint8_t round_channel(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
    check_dims(width, height);
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

RgbImage::RgbImage(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dims(width, height);
    if (pixels_.size() != static_cast<std::size_t>(width) * height) {
        throw std::invalid_argument("pixel count does not match " + std::to_string(width) + "x" +
                                    std::to_string(height));
    }
}

PlanarImage::PlanarImage(int width, int height, ColorSpace space)
    : width_(width), height_(height), space_(space) {
    check_dims(width, height);
    const int n = space == ColorSpace::Gray ? 1 : 3;
    planes_.assign(n, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0));
}

PlanarImage PlanarImage::gray(int width, int height, std::vector<double> values) {
    PlanarImage out(width, height, ColorSpace::Gray);
    if (values.size() != out.pixel_count()) {
        throw std::invalid_argument("gray plane size does not match dimensions");
    }
    out.planes_[0] = std::move(values);
    return out;
}

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    const Format format = sniff(bytes);
    if (format == Format::Unknown) {
        throw DecodeError("unsupported image format (expected PNG or JPEG)");
    }
    const char* name = format == Format::Png ? "PNG" : "JPEG";
    if (format == Format::Jpeg && !has_jpeg_eoi(bytes)) {
        throw DecodeError(std::string("corrupt ") + name + " stream: missing end-of-image marker");
    }

    silence_opencv();
    cv::Mat decoded;
    try {
        const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
        decoded = cv::imdecode(buf, cv::IMREAD_COLOR | cv::IMREAD_IGNORE_ORIENTATION);
    } catch (const cv::Exception& e) {
        throw DecodeError(std::string("corrupt ") + name + " stream: " + e.what());
    }
    if (decoded.empty() || decoded.type() != CV_8UC3) {
        throw DecodeError(std::string("corrupt ") + name + " stream");
    }

    RgbImage img(decoded.cols, decoded.rows);
    for (int y = 0; y < decoded.rows; ++y) {
        const auto* row = decoded.ptr<std::uint8_t>(y);
        for (int x = 0; x < decoded.cols; ++x) {
            img.at(x, y) = Rgb{row[3 * x + 2], row[3 * x + 1], row[3 * x + 0]};
        }
    }
    return img;
}

RgbImage read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return decode_image(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(path + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_jpeg(const RgbImage& img, int quality) {
    return encode(img, ".jpg", {cv::IMWRITE_JPEG_QUALITY, std::clamp(quality, 0, 100)});
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    return encode(img, ".png", {});
}

RgbImage resize_bilinear(const RgbImage& img, int width, int height) {
    check_dims(width, height);
    if (width == img.width() && height == img.height()) return img;

    struct Tap {
        int lo;
        int hi;
        double frac;
    };
    auto taps = [](int dst_len, int src_len) {
        std::vector<Tap> out(dst_len);
        const double scale = static_cast<double>(src_len) / dst_len;
        for (int i = 0; i < dst_len; ++i) {
            double s = (i + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
            const int lo = static_cast<int>(std::floor(s));
            const int hi = std::min(lo + 1, src_len - 1);
            out[i] = {lo, hi, s - lo};
        }
        return out;
    };
    const auto xs = taps(width, img.width());
    const auto ys = taps(height, img.height());

    RgbImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const Tap ty = ys[y];
        for (int x = 0; x < width; ++x) {
            const Tap tx = xs[x];
            const Rgb p00 = img.at(tx.lo, ty.lo);
            const Rgb p10 = img.at(tx.hi, ty.lo);
            const Rgb p01 = img.at(tx.lo, ty.hi);
            const Rgb p11 = img.at(tx.hi, ty.hi);
            auto blend = [&](std::uint8_t Rgb::*ch) {
                const double top = p00.*ch * (1.0 - tx.frac) + p10.*ch * tx.frac;
                const double bottom = p01.*ch * (1.0 - tx.frac) + p11.*ch * tx.frac;
                return round_channel(top * (1.0 - ty.frac) + bottom * ty.frac);
            };
            out.at(x, y) = Rgb{blend(&Rgb::r), blend(&Rgb::g), blend(&Rgb::b)};
        }
    }
    return out;
}

RgbImage resize_canonical(const RgbImage& img) {
    return resize_bilinear(img, kCanonicalWidth, kCanonicalHeight);
}

std::array<double, 3> rgb_to_hsv(Rgb px) {
    const double r = px.r, g = px.g, b = px.b;
    const double hi = std::max({r, g, b});
    const double lo = std::min({r, g, b});
    const double delta = hi - lo;

    const double v = hi / 255.0;
    if (hi == 0.0 || delta == 0.0) return {0.0, 0.0, v};

    const double s = delta / hi;
    double h;
    if (hi == r) {
        h = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (hi == g) {
        h = 60.0 * ((b - r) / delta + 2.0);
    } else {
        h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    return {h, s, v};
}

std::array<double, 3> rgb_to_ycbcr(Rgb px) {
    const double r = px.r, g = px.g, b = px.b;
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    const double cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    const double cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    auto norm = [](double v) { return std::clamp(v, 0.0, 255.0) / 255.0; };
    return {norm(y), norm(cb), norm(cr)};
}

double rgb_to_gray(Rgb px) {
    const double y = 0.299 * px.r + 0.587 * px.g + 0.114 * px.b;
    return std::clamp(y, 0.0, 255.0) / 255.0;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h, 360.0) / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp)) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    const double m = v - c;
    return {(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0};
}

PlanarImage rgb_to_hsv(const RgbImage& img) {
    PlanarImage out(img.width(), img.height(), ColorSpace::Hsv);
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const auto hsv = rgb_to_hsv(px[i]);
        for (int c = 0; c < 3; ++c) out.plane(c)[i] = hsv[c];
    }
    return out;
}

PlanarImage rgb_to_ycbcr(const RgbImage& img) {
    PlanarImage out(img.width(), img.height(), ColorSpace::YCbCr);
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const auto ycc = rgb_to_ycbcr(px[i]);
        for (int c = 0; c < 3; ++c) out.plane(c)[i] = ycc[c];
    }
    return out;
}

PlanarImage rgb_to_gray(const RgbImage& img) {
    PlanarImage out(img.width(), img.height(), ColorSpace::Gray);
    const auto px = img.pixels();
    auto plane = out.plane(0);
    for (std::size_t i = 0; i < px.size(); ++i) plane[i] = rgb_to_gray(px[i]);
    return out;
}

}  // namespace cbir
