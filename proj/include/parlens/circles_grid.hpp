#pragma once

#include <vector>

#include "parlens/homography.hpp"
#include "parlens/image.hpp"

namespace parlens {

/// Asymmetric circles calibration target: odd rows sit half a spacing to
/// the right, so diagonal neighbours are diagonal_spacing apart.
struct CirclesGridSpec {
    int rows = 4;
    int cols = 11;
    double diagonal_spacing = 1.0;

    int count() const { return rows * cols; }
    void validate() const;
};

/// Canonical world coordinates, row-major: point(r, c) =
/// ((2c + r mod 2) * s/2, r * s/2, 0) with s = diagonal_spacing.
std::vector<Point3> generate_grid_points(const CirclesGridSpec& spec);

/// Draw dark anti-aliased discs at the given pixel centers on a light
/// background; coverage is estimated on a supersample x supersample grid
/// per pixel.
Image render_circles(const std::vector<Point2>& centers_px, double radius_px,
                     const Shape& shape, int supersample = 8,
                     double foreground = 0.1, double background = 0.9);

struct GridRenderOptions {
    double pixels_per_unit = 40.0;
    Point2 origin_px{60.0, 60.0};  ///< pixel position of world (0, 0)
    double circle_radius_px = 8.0;
    int supersample = 8;
    double foreground = 0.1;
    double background = 0.9;
};

/// Pixel positions of the grid points under the render options, in the
/// same canonical ordering as generate_grid_points.
std::vector<Point2> grid_pixel_centers(const CirclesGridSpec& spec,
                                       const GridRenderOptions& options);

/// Render the full grid target into an image of the given shape.
Image render_circles_grid(const CirclesGridSpec& spec, const Shape& shape,
                          const GridRenderOptions& options = {});

/// Locate the grid in an image of dark circles on a light background:
/// Otsu threshold, connected components, intensity-weighted centroids,
/// area-consistency filter (median +/- 50%), then ordering into the
/// canonical row-major layout by projection onto the principal axes.
/// Returns exactly rows*cols centroids or throws DetectionError.
std::vector<Point2> detect_grid(const Image& img, const CirclesGridSpec& spec);

} // namespace parlens
