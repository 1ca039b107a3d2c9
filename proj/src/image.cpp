#include "parlens/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace parlens {

PixelGrid centered_window(const Shape& full, const Shape& window) {
    if (window.rows > full.rows || window.cols > full.cols)
        throw ShapeError("centered_window: window exceeds parent extent");
    return {(full.rows - window.rows) / 2, (full.cols - window.cols) / 2,
            window.rows, window.cols};
}

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0 || (channels != 1 && channels != 3))
        throw ShapeError("Image: extent must be positive with 1 or 3 channels");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> samples, BitDepthHint hint)
    : height_(height), width_(width), channels_(channels), data_(std::move(samples)), hint_(hint) {
    if (height <= 0 || width <= 0 || (channels != 1 && channels != 3))
        throw ShapeError("Image: extent must be positive with 1 or 3 channels");
    if (data_.size() != static_cast<std::size_t>(height) * width * channels)
        throw ShapeError("Image: sample count does not match height*width*channels");
}

bool Image::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Image::min() const {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Image::max() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Image::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

Image& Image::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Image& Image::operator+=(const Image& other) {
    if (other.data_.size() != data_.size())
        throw ShapeError("Image += : size mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Image& Image::operator-=(const Image& other) {
    if (other.data_.size() != data_.size())
        throw ShapeError("Image -= : size mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Image crop(const Image& img, const PixelGrid& window) {
    if (!window.inside(img.shape()))
        throw ShapeError("crop: window out of bounds");
    Image out(window.rows, window.cols, img.channels());
    out.set_bit_depth_hint(img.bit_depth_hint());
    const int ch = img.channels();
    for (int r = 0; r < window.rows; ++r)
        for (int c = 0; c < window.cols; ++c)
            for (int k = 0; k < ch; ++k)
                out.at(r, c, k) = img.at(window.row0 + r, window.col0 + c, k);
    return out;
}

Image embed(const Image& img, const Shape& full, const PixelGrid& window) {
    if (window.shape() != img.shape())
        throw ShapeError("embed: window extent does not match image");
    if (!window.inside(full))
        throw ShapeError("embed: window out of bounds");
    Image out(full.rows, full.cols, img.channels(), 0.0);
    const int ch = img.channels();
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            for (int k = 0; k < ch; ++k)
                out.at(window.row0 + r, window.col0 + c, k) = img.at(r, c, k);
    return out;
}

Image resample_bilinear(const Image& img, const Shape& new_shape) {
    if (new_shape.rows <= 0 || new_shape.cols <= 0)
        throw ShapeError("resample_bilinear: new shape must be positive");
    Image out(new_shape.rows, new_shape.cols, img.channels());
    out.set_bit_depth_hint(img.bit_depth_hint());
    const double sr = static_cast<double>(img.height()) / new_shape.rows;
    const double sc = static_cast<double>(img.width()) / new_shape.cols;
    const int ch = img.channels();
    for (int r = 0; r < new_shape.rows; ++r) {
        double src_r = (r + 0.5) * sr - 0.5;
        src_r = std::clamp(src_r, 0.0, static_cast<double>(img.height() - 1));
        const int r0 = static_cast<int>(std::floor(src_r));
        const int r1 = std::min(r0 + 1, img.height() - 1);
        const double fr = src_r - r0;
        for (int c = 0; c < new_shape.cols; ++c) {
            double src_c = (c + 0.5) * sc - 0.5;
            src_c = std::clamp(src_c, 0.0, static_cast<double>(img.width() - 1));
            const int c0 = static_cast<int>(std::floor(src_c));
            const int c1 = std::min(c0 + 1, img.width() - 1);
            const double fc = src_c - c0;
            for (int k = 0; k < ch; ++k) {
                const double top = img.at(r0, c0, k) * (1.0 - fc) + img.at(r0, c1, k) * fc;
                const double bot = img.at(r1, c0, k) * (1.0 - fc) + img.at(r1, c1, k) * fc;
                out.at(r, c, k) = top * (1.0 - fr) + bot * fr;
            }
        }
    }
    return out;
}

double bilinear_sample(const Image& img, double row, double col, int channel) {
    if (row <= -1.0 || col <= -1.0 || row >= img.height() || col >= img.width())
        return 0.0;
    const int r0 = static_cast<int>(std::floor(row));
    const int c0 = static_cast<int>(std::floor(col));
    const double fr = row - r0;
    const double fc = col - c0;
    auto sample = [&](int r, int c) -> double {
        if (r < 0 || c < 0 || r >= img.height() || c >= img.width()) return 0.0;
        return img.at(r, c, channel);
    };
    return sample(r0, c0) * (1.0 - fr) * (1.0 - fc) +
           sample(r0, c0 + 1) * (1.0 - fr) * fc +
           sample(r0 + 1, c0) * fr * (1.0 - fc) +
           sample(r0 + 1, c0 + 1) * fr * fc;
}

double percentile(const Image& img, double q) {
    if (img.empty())
        throw ValueError("percentile: empty image");
    if (!(q > 0.0 && q <= 1.0))
        throw ValueError("percentile: q must be in (0, 1]");
    std::vector<double> sorted(img.data());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

std::string to_string(BitDepthHint hint) {
    switch (hint) {
        case BitDepthHint::u8: return "8";
        case BitDepthHint::u16: return "16";
        case BitDepthHint::floating: return "float";
    }
    return "float";
}

BitDepthHint bit_depth_hint_from_string(const std::string& s) {
    if (s == "8") return BitDepthHint::u8;
    if (s == "16") return BitDepthHint::u16;
    if (s == "float") return BitDepthHint::floating;
    throw ValueError("unknown bit depth hint: " + s);
}

} // namespace parlens
