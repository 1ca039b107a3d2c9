#pragma once

#include "parlens/homography.hpp"
#include "parlens/image.hpp"

namespace parlens {

struct PhotometricResult {
    Homography h;
    double initial_residual = 0.0;  ///< mean squared error at init, full resolution
    double final_residual = 0.0;    ///< mean squared error of the returned transform
    int iterations = 0;             ///< total Gauss-Newton steps across the pyramid
};

/// Direct image alignment: Gauss-Newton on the 8 free homography entries
/// (bottom-right fixed at 1), minimizing the mean squared intensity
/// difference between warp(moving, h) and fixed over valid (in-bounds)
/// pixels. Coarse-to-fine over a 3-level pyramid. The returned transform is
/// the best iterate seen, so its residual never exceeds the initial one.
///
/// Throws ConvergenceError when the residual rises for 5 consecutive
/// iterations at full resolution, or when fewer than 25% of the pixels
/// overlap.
PhotometricResult refine_homography_photometric(const Image& moving, const Image& fixed,
                                                const Homography& init, int iterations = 50);

} // namespace parlens
