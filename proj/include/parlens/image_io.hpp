#pragma once

#include <string>

#include "parlens/image.hpp"

namespace parlens {

enum class ImageFileFormat { png8, png16, pfm };

/// Loads an 8-bit PNG, 16-bit PNG or PFM, dispatching on magic bytes.
/// Integer samples are scaled to [0,1] by 1/(2^bits - 1); PFM samples are
/// read verbatim (IEEE-754 single, widened to double). The source
/// quantization is recorded in the image's bit_depth_hint.
///
/// Throws IoError (unreadable), UnsupportedFormatError (unknown magic) or
/// CorruptFileError (bad header / truncated data).
Image load_image(const std::string& path);

/// Writes `img` in the requested format. PNG samples are clamped to [0,1]
/// and quantized round-half-up to 2^bits - 1; PFM is lossless at single
/// precision (little-endian, scale -1.0 header, bottom row first).
/// Refuses non-finite samples.
void save_image(const Image& img, const std::string& path, ImageFileFormat format);

std::string to_string(ImageFileFormat f);

} // namespace parlens
