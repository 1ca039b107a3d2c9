#pragma once

#include <array>
#include <vector>

#include <nlohmann/json.hpp>

#include "parlens/errors.hpp"
#include "parlens/image.hpp"

namespace parlens {

/// Planar point in (x, y) = (column, row) convention. All geometry code
/// works in x-right / y-down pixel coordinates.
struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Planar calibration target point; z stays 0 for the flat grids used here.
struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// 3x3 projective transform acting on (x, y, 1) column vectors, stored
/// row-major and kept normalized so the bottom-right element is 1 whenever
/// it is nonzero.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return Homography{}; }

    double& at(int r, int c) { return m[static_cast<std::size_t>(r) * 3 + c]; }
    double at(int r, int c) const { return m[static_cast<std::size_t>(r) * 3 + c]; }

    /// Rescale so m[2][2] == 1. No-op when the corner is (near) zero.
    void normalize();

    /// Apply to a point; throws ValueError when the point maps to infinity.
    Point2 apply(const Point2& p) const;

    /// Matrix inverse; throws ValueError on a singular matrix.
    Homography inverse() const;

    double determinant() const;

    nlohmann::json to_json() const;
    static Homography from_json(const nlohmann::json& j);
};

/// Matrix product a*b: the transform that applies b first, then a.
Homography compose(const Homography& a, const Homography& b);

/// Direct linear transform from >= 4 correspondences with Hartley
/// normalization (centroid to origin, mean distance sqrt(2)). Throws
/// ValueError on too few points and ConvergenceError on degenerate
/// (rank-deficient) configurations.
Homography estimate_homography_dlt(const std::vector<Point2>& src,
                                   const std::vector<Point2>& dst);

struct RansacOptions {
    double inlier_threshold_px = 1.0;
    double confidence = 0.999;
    int max_iterations = 2000;
    std::uint64_t seed = 7;
};

struct RansacResult {
    Homography h;
    std::vector<bool> inliers;
    int iterations = 0;
};

/// RANSAC wrapper around the DLT: minimal 4-point samples, forward transfer
/// error against the threshold, adaptive trial count from the running inlier
/// ratio, final DLT refit on the consensus set.
RansacResult estimate_homography_ransac(const std::vector<Point2>& src,
                                        const std::vector<Point2>& dst,
                                        const RansacOptions& options = {});

/// Inverse-map warp with bilinear sampling; out-of-bounds samples are 0.
/// Content moves according to h: out(p) = img(h^-1 p).
Image warp(const Image& img, const Homography& h, const Shape& out_shape);

/// Same warp plus a single-channel validity mask (1 where the source
/// location fell inside the input image, 0 elsewhere).
struct WarpResult {
    Image image;
    Image mask;
};
WarpResult warp_with_mask(const Image& img, const Homography& h, const Shape& out_shape);

/// Record point correspondences as "x_src,y_src,x_dst,y_dst" CSV.
void write_correspondences_csv(const std::string& path,
                               const std::vector<Point2>& src,
                               const std::vector<Point2>& dst);

} // namespace parlens
