#pragma once

#include "parlens/image.hpp"
#include "parlens/psf.hpp"

namespace parlens {

/// Smallest n' >= n whose prime factors are all in {2, 3, 5}; padded FFT
/// extents are rounded up to such sizes.
int next_smooth_size(int n);

/// Full linear (zero-padded, non-circular) 2-D convolution via the
/// frequency domain. Output extent is scene + psf - 1 per axis. A
/// single-channel PSF broadcasts across colour channels; otherwise channel
/// counts must match. Negative round-off residue in [-1e-9, 0) is clamped
/// to zero; genuinely negative inputs pass through untouched.
Image convolve_linear(const Image& scene, const PointSpreadFunction& psf);

/// Same engine without the round-off clamp, for signed kernels/data
/// (correlation, autocorrelation). Single-channel planes only.
Image convolve_linear_raw(const Image& a, const Image& b);

/// The measurement operator A: crop(convolve_linear(scene, psf), window).
/// The window addresses the full-convolution extent.
Image forward(const Image& scene, const PointSpreadFunction& psf, const PixelGrid& sensor_window);

/// A^T: zero-embeds the residual into the full-convolution extent, then
/// correlates with the PSF, returning scene_shape. Satisfies
/// <forward(x), y> == <x, adjoint(y)>.
Image adjoint(const Image& residual, const PointSpreadFunction& psf,
              const PixelGrid& sensor_window, const Shape& scene_shape);

/// Convolution extent of scene and PSF shapes: scene + psf - 1 per axis.
Shape full_extent(const Shape& scene, const Shape& psf);

} // namespace parlens
