#include "parlens/image_io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <vector>

namespace parlens {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    return FilePtr(std::fopen(path.c_str(), mode));
}

// ---------------------------------------------------------------- PNG ----

Image load_png(std::FILE* f, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("load_image: libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("load_image: libpng init failed for " + path);
    }
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw CorruptFileError("load_image: corrupt PNG header or data in " + path);
    }
    png_init_io(png, f);

    // Normalize exotic layouts to 8/16-bit gray or RGB without alpha.
    png_read_info(png, info);
    const png_byte color_type = png_get_color_type(png, info);
    png_byte bit_depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    bit_depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    if ((bit_depth != 8 && bit_depth != 16) || (channels != 1 && channels != 3)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw UnsupportedFormatError("load_image: unsupported PNG layout in " + path);
    }

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<png_byte> buffer(row_bytes * height);
    rows.resize(height);
    for (int r = 0; r < height; ++r) rows[r] = buffer.data() + r * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image out(height, width, channels);
    out.set_bit_depth_hint(bit_depth == 8 ? BitDepthHint::u8 : BitDepthHint::u16);
    const double scale = bit_depth == 8 ? 255.0 : 65535.0;
    for (int r = 0; r < height; ++r) {
        const png_byte* row = buffer.data() + r * row_bytes;
        for (int c = 0; c < width; ++c) {
            for (int k = 0; k < channels; ++k) {
                double v;
                if (bit_depth == 8) {
                    v = row[c * channels + k];
                } else {
                    // PNG stores 16-bit samples big-endian.
                    const png_byte hi = row[(c * channels + k) * 2];
                    const png_byte lo = row[(c * channels + k) * 2 + 1];
                    v = static_cast<double>((hi << 8) | lo);
                }
                out.at(r, c, k) = v / scale;
            }
        }
    }
    return out;
}

void save_png(const Image& img, const std::string& path, int bit_depth) {
    FilePtr f = open_file(path, "wb");
    if (!f) throw IoError("save_image: cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("save_image: libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("save_image: libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_image: PNG write failed for " + path);
    }
    png_init_io(png, f.get());

    const int color_type = img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width(), img.height(), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const double scale = bit_depth == 8 ? 255.0 : 65535.0;
    const int ch = img.channels();
    const std::size_t row_bytes = static_cast<std::size_t>(img.width()) * ch * (bit_depth / 8);
    std::vector<png_byte> row(row_bytes);
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
            for (int k = 0; k < ch; ++k) {
                const double clamped = std::fmin(std::fmax(img.at(r, c, k), 0.0), 1.0);
                const auto q = static_cast<unsigned>(std::floor(clamped * scale + 0.5));
                if (bit_depth == 8) {
                    row[c * ch + k] = static_cast<png_byte>(q);
                } else {
                    row[(c * ch + k) * 2] = static_cast<png_byte>(q >> 8);
                    row[(c * ch + k) * 2 + 1] = static_cast<png_byte>(q & 0xff);
                }
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------- PFM ----

float byteswap_float(float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    bits = ((bits & 0x000000ffu) << 24) | ((bits & 0x0000ff00u) << 8) |
           ((bits & 0x00ff0000u) >> 8) | ((bits & 0xff000000u) >> 24);
    return std::bit_cast<float>(bits);
}

Image load_pfm(std::FILE* f, const std::string& path) {
    char magic[3] = {};
    if (std::fscanf(f, "%2s", magic) != 1)
        throw CorruptFileError("load_image: truncated PFM header in " + path);
    int channels;
    if (std::strcmp(magic, "PF") == 0)
        channels = 3;
    else if (std::strcmp(magic, "Pf") == 0)
        channels = 1;
    else
        throw CorruptFileError("load_image: bad PFM magic in " + path);

    int width = 0, height = 0;
    double scale = 0.0;
    if (std::fscanf(f, "%d %d %lf", &width, &height, &scale) != 3 || width <= 0 ||
        height <= 0 || scale == 0.0)
        throw CorruptFileError("load_image: bad PFM header in " + path);
    // Single whitespace byte separates header from samples.
    if (std::fgetc(f) == EOF)
        throw CorruptFileError("load_image: truncated PFM in " + path);

    const bool file_big_endian = scale > 0.0;
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    std::vector<float> samples(count);
    if (std::fread(samples.data(), sizeof(float), count, f) != count)
        throw CorruptFileError("load_image: truncated PFM samples in " + path);

    constexpr bool host_big_endian = std::endian::native == std::endian::big;
    if (file_big_endian != host_big_endian)
        for (float& v : samples) v = byteswap_float(v);

    const double magnitude = std::fabs(scale);
    Image out(height, width, channels);
    out.set_bit_depth_hint(BitDepthHint::floating);
    // PFM scanlines run bottom-to-top.
    for (int r = 0; r < height; ++r) {
        const float* row = samples.data() + static_cast<std::size_t>(height - 1 - r) * width * channels;
        for (int c = 0; c < width; ++c)
            for (int k = 0; k < channels; ++k)
                out.at(r, c, k) = static_cast<double>(row[c * channels + k]) *
                                  (magnitude == 1.0 ? 1.0 : magnitude);
    }
    if (!out.all_finite())
        throw CorruptFileError("load_image: non-finite PFM samples in " + path);
    return out;
}

void save_pfm(const Image& img, const std::string& path) {
    FilePtr f = open_file(path, "wb");
    if (!f) throw IoError("save_image: cannot open " + path + " for writing");

    std::ostringstream header;
    header << (img.channels() == 1 ? "Pf" : "PF") << "\n"
           << img.width() << " " << img.height() << "\n"
           << "-1.0\n";
    const std::string h = header.str();
    if (std::fwrite(h.data(), 1, h.size(), f.get()) != h.size())
        throw IoError("save_image: write failed for " + path);

    constexpr bool host_big_endian = std::endian::native == std::endian::big;
    const int ch = img.channels();
    std::vector<float> row(static_cast<std::size_t>(img.width()) * ch);
    for (int r = img.height() - 1; r >= 0; --r) {
        for (int c = 0; c < img.width(); ++c)
            for (int k = 0; k < ch; ++k) {
                float v = static_cast<float>(img.at(r, c, k));
                row[c * ch + k] = host_big_endian ? byteswap_float(v) : v;
            }
        if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) != row.size())
            throw IoError("save_image: write failed for " + path);
    }
}

} // namespace

Image load_image(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    if (!f) throw IoError("load_image: cannot open " + path);

    unsigned char magic[8] = {};
    const std::size_t got = std::fread(magic, 1, sizeof(magic), f.get());
    if (got < 2) throw CorruptFileError("load_image: file too short: " + path);
    std::rewind(f.get());

    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (got == 8 && std::memcmp(magic, png_sig, 8) == 0) return load_png(f.get(), path);
    if (magic[0] == 'P' && (magic[1] == 'F' || magic[1] == 'f')) return load_pfm(f.get(), path);
    throw UnsupportedFormatError("load_image: unsupported format in " + path);
}

void save_image(const Image& img, const std::string& path, ImageFileFormat format) {
    if (img.empty()) throw ValueError("save_image: empty image");
    if (!img.all_finite()) throw ValueError("save_image: refusing non-finite samples");
    switch (format) {
        case ImageFileFormat::png8: save_png(img, path, 8); return;
        case ImageFileFormat::png16: save_png(img, path, 16); return;
        case ImageFileFormat::pfm: save_pfm(img, path); return;
    }
    throw ValueError("save_image: unknown format");
}

std::string to_string(ImageFileFormat f) {
    switch (f) {
        case ImageFileFormat::png8: return "png8";
        case ImageFileFormat::png16: return "png16";
        case ImageFileFormat::pfm: return "pfm";
    }
    return "pfm";
}

} // namespace parlens
