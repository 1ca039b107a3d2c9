#pragma once

#include <nlohmann/json.hpp>

#include "parlens/circles_grid.hpp"
#include "parlens/homography.hpp"
#include "parlens/image.hpp"

namespace parlens {

/// Radial-tangential lens model. `distort` maps ideal pinhole-normalized
/// coordinates to observed pixel coordinates:
///   x' = x(1 + k1 r^2 + k2 r^4 + k3 r^6) + 2 p1 x y + p2 (r^2 + 2 x^2)
///   y' = y(1 + k1 r^2 + k2 r^4 + k3 r^6) + p1 (r^2 + 2 y^2) + 2 p2 x y
///   pixel = (fx x' + cx, fy y' + cy)
struct DistortionModel {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;

    void validate() const;

    nlohmann::json to_json() const;
    static DistortionModel from_json(const nlohmann::json& j);
};

/// Forward model: normalized coordinates -> distorted pixel coordinates.
Point2 distort(const Point2& normalized, const DistortionModel& model);

/// Invert the distortion at one pixel via Newton iteration (at most 20
/// steps, 1e-9 convergence); returns ideal normalized coordinates. Throws
/// ConvergenceError when the iteration fails to settle.
Point2 undistort_point(const Point2& pixel, const DistortionModel& model);

/// Remove lens distortion. The output is an ideal pinhole view using the
/// model's focal lengths and an image-centered principal point; each output
/// pixel maps through the forward distortion into the source image and is
/// sampled bilinearly (out of bounds -> 0). A zero-coefficient model with a
/// centered principal point is the identity remap.
Image undistort_image(const Image& img, const DistortionModel& model);

/// Apply lens distortion to an ideal image (simulating a distorting
/// camera): each output pixel is Newton-inverted to its ideal position and
/// sampled there. Throws ConvergenceError naming the pixel when the
/// inversion diverges (non-invertible model in the field of view).
Image distort_image(const Image& img, const DistortionModel& model);

struct CalibrationResult {
    DistortionModel model;
    double rms_reprojection_px = 0.0;
    int lm_iterations = 0;
};

/// Planar-target calibration from >= 3 views of the circles grid, each a
/// full canonical-order detection: per-view DLT homographies, closed-form
/// intrinsics, then Levenberg-Marquardt over intrinsics + distortion +
/// per-view poses minimizing reprojection error.
CalibrationResult calibrate_distortion(const std::vector<std::vector<Point2>>& detections,
                                       const CirclesGridSpec& spec);

} // namespace parlens
