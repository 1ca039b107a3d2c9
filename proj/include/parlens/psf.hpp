#pragma once

#include <cstdint>
#include <string>

#include "parlens/image.hpp"

namespace parlens {

enum class PsfNormalization { unit_sum, unit_energy, raw };

/// Calibrated impulse response of one lensless imager. Samples are
/// non-negative; support_shape records the aperture-limited extent.
struct PointSpreadFunction {
    Image image;
    PsfNormalization normalization = PsfNormalization::raw;
    Shape support_shape;
    std::string label;

    /// Rescales per channel: unit_sum makes each channel sum to 1,
    /// unit_energy makes each channel's squared samples sum to 1.
    void normalize(PsfNormalization target);

    void validate() const;
};

PointSpreadFunction make_psf(Image img, std::string label,
                             PsfNormalization norm = PsfNormalization::unit_sum);

/// PSFs persist as a PFM raster plus a JSON sidecar (same path with a
/// .json suffix appended) carrying {label, normalization, support, channels}.
PointSpreadFunction load_psf(const std::string& pfm_path);
void save_psf(const PointSpreadFunction& psf, const std::string& pfm_path);

/// Diffuser-like PSF: a seeded sum of small Gaussian blobs scattered over
/// the support, mimicking a caustic pattern. unit_sum normalized.
PointSpreadFunction synth_diffuser_psf(const Shape& shape, int blob_count,
                                       double blob_sigma, std::uint64_t seed);

/// Lenslet-like PSF: a few sharp, nearly delta impulses. unit_sum normalized.
PointSpreadFunction synth_lenslet_psf(const Shape& shape, int impulse_count,
                                      double impulse_sigma, std::uint64_t seed);

/// Single centered impulse; the convolution identity.
PointSpreadFunction delta_psf(const Shape& shape);

std::string to_string(PsfNormalization n);
PsfNormalization psf_normalization_from_string(const std::string& s);

} // namespace parlens
