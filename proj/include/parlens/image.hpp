#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parlens/errors.hpp"

namespace parlens {

/// Source quantization of an image's samples. Integer files are rescaled to
/// [0,1] on load; the hint remembers where they came from.
enum class BitDepthHint { u8, u16, floating };

struct Shape {
    int rows = 0;
    int cols = 0;

    bool operator==(const Shape&) const = default;
};

/// A crop window: origin offset (row, col) plus extent, in pixels.
struct PixelGrid {
    int row0 = 0;
    int col0 = 0;
    int rows = 0;
    int cols = 0;

    bool operator==(const PixelGrid&) const = default;

    Shape shape() const { return {rows, cols}; }
    bool positive() const { return rows > 0 && cols > 0; }
    bool inside(const Shape& parent) const {
        return positive() && row0 >= 0 && col0 >= 0 &&
               row0 + rows <= parent.rows && col0 + cols <= parent.cols;
    }
};

/// Centered window of `window` extent inside a raster of `full` extent.
/// When the margin is odd the extra pixel goes to the bottom/right.
PixelGrid centered_window(const Shape& full, const Shape& window);

/// 2-D raster of double samples, row-major, channel-last. 1 or 3 channels.
///
/// The pipeline's universal currency: scenes, PSFs, measurements and
/// reconstructions are all Images. Value semantics throughout; operations
/// never mutate their inputs.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);
    Image(int height, int width, int channels, std::vector<double> samples,
          BitDepthHint hint = BitDepthHint::floating);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    Shape shape() const { return {height_, width_}; }
    std::size_t sample_count() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    BitDepthHint bit_depth_hint() const { return hint_; }
    void set_bit_depth_hint(BitDepthHint h) { hint_ = h; }

    double& at(int row, int col, int channel = 0) {
        return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
    }
    double at(int row, int col, int channel = 0) const {
        return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;
    double min() const;
    double max() const;
    double sum() const;

    Image& operator*=(double s);
    Image& operator+=(const Image& other);
    Image& operator-=(const Image& other);

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
    BitDepthHint hint_ = BitDepthHint::floating;
};

/// Exact sub-raster copy; no interpolation. Throws ShapeError when the
/// window leaves the image.
Image crop(const Image& img, const PixelGrid& window);

/// Zero-embed `img` into a canvas of `full` extent at the window's offset.
/// Left inverse of crop for interior windows.
Image embed(const Image& img, const Shape& full, const PixelGrid& window);

/// Bilinear resampling with half-pixel-centered coordinates: destination
/// pixel i samples the source at (i + 0.5) * src/dst - 0.5, clamped to the
/// edge. Constant images map to constant images exactly.
Image resample_bilinear(const Image& img, const Shape& new_shape);

/// Bilinear lookup at a fractional (row, col); coordinates outside the
/// raster contribute zero.
double bilinear_sample(const Image& img, double row, double col, int channel);

/// Nearest-rank percentile of all samples, q in (0, 1].
double percentile(const Image& img, double q);

std::string to_string(BitDepthHint hint);
BitDepthHint bit_depth_hint_from_string(const std::string& s);

} // namespace parlens
