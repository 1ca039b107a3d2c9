#include <doctest.h>

#include <cmath>
#include <functional>

#include "parlens/photometric.hpp"
#include "oracles.hpp"

using parlens::Homography;
using parlens::Image;
using parlens::Point2;

namespace {

/// Smooth, feature-rich test pattern with gradients everywhere.
double pattern(double x, double y) {
    return 0.5 + 0.22 * std::sin(x * 0.23 + 0.7) * std::cos(y * 0.31) +
           0.18 * std::sin((x + y) * 0.11) + 0.08 * std::cos(x * 0.05 - y * 0.17);
}

/// Soft checkerboard: smooth edges so the intensity gradient carries
/// alignment information.
double soft_checker(double x, double y) {
    const double wave = std::sin(x * M_PI / 8.0) * std::sin(y * M_PI / 8.0);
    return 0.5 + 0.45 * std::tanh(wave / 0.25);
}

Image render(int rows, int cols, const std::function<double(double, double)>& f,
             const Homography& to_source) {
    Image img(rows, cols, 1);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const Point2 q = to_source.apply({static_cast<double>(c), static_cast<double>(r)});
            img.at(r, c) = f(q.x, q.y);
        }
    return img;
}

Homography translation(double dx, double dy) {
    Homography t;
    t.m = {1, 0, dx, 0, 1, dy, 0, 0, 1};
    return t;
}

} // namespace

TEST_SUITE("photometric") {

TEST_CASE("aligning an image with itself returns the identity") {
    const Image fixed = render(48, 48, pattern, Homography::identity());
    const parlens::PhotometricResult result =
        parlens::refine_homography_photometric(fixed, fixed, Homography::identity());
    CHECK(result.final_residual <= result.initial_residual);
    CHECK(result.final_residual < 1e-20);
    Homography h = result.h;
    h.normalize();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(h.at(r, c) - (r == c ? 1.0 : 0.0)) < 1e-9);
}

TEST_CASE("recovers a synthetic 2.5 px shift to better than 0.05 px") {
    const Image fixed = render(64, 64, pattern, Homography::identity());
    // moving(q) = fixed evaluated at m(q): the true aligning transform is m
    const Homography truth = translation(2.5, 0.0);
    const Image moving = render(64, 64, pattern, truth);

    const parlens::PhotometricResult result =
        parlens::refine_homography_photometric(moving, fixed, Homography::identity());
    Homography h = result.h;
    h.normalize();
    CHECK(std::abs(h.at(0, 2) - 2.5) < 0.05);
    CHECK(std::abs(h.at(1, 2) - 0.0) < 0.05);
    CHECK(result.final_residual < result.initial_residual);
}

TEST_CASE("checkerboard under shift plus slight rotation: corners to 0.1 px") {
    const int n = 64;
    const Image fixed = render(n, n, soft_checker, Homography::identity());

    const double a = 0.5 * M_PI / 180.0;  // half a degree
    Homography truth;
    truth.m = {std::cos(a), -std::sin(a), 1.2, std::sin(a), std::cos(a), -0.8, 0, 0, 1};
    const Image moving = render(n, n, soft_checker, truth);

    const parlens::PhotometricResult result =
        parlens::refine_homography_photometric(moving, fixed, Homography::identity());

    // compare the mapping on the checker corners (period-8 grid interior)
    double worst = 0.0;
    for (int gy = 2; gy <= 6; ++gy)
        for (int gx = 2; gx <= 6; ++gx) {
            const Point2 p{8.0 * gx, 8.0 * gy};
            const Point2 want = truth.apply(p);
            const Point2 got = result.h.apply(p);
            worst = std::max(worst, std::hypot(want.x - got.x, want.y - got.y));
        }
    CHECK(worst < 0.1);
}

TEST_CASE("returned transform never scores worse than the initial guess") {
    const Image fixed = render(48, 48, pattern, Homography::identity());
    const Image moving = render(48, 48, pattern, translation(1.0, 1.5));
    // deliberately poor but overlapping init
    const Homography init = translation(-2.0, 1.0);
    const parlens::PhotometricResult result =
        parlens::refine_homography_photometric(moving, fixed, init);
    CHECK(result.final_residual <= result.initial_residual);
    CHECK(result.iterations > 0);
}

TEST_CASE("insufficient overlap is a reported failure, not a silent answer") {
    const Image fixed = render(48, 48, pattern, Homography::identity());
    const Image moving = render(48, 48, pattern, Homography::identity());
    const Homography init = translation(44.0, 0.0);  // <10% overlap
    CHECK_THROWS_AS(
        parlens::refine_homography_photometric(moving, fixed, init),
        parlens::ConvergenceError);
}

TEST_CASE("shape mismatches are rejected") {
    const Image fixed = render(32, 32, pattern, Homography::identity());
    const Image moving = render(32, 30, pattern, Homography::identity());
    CHECK_NOTHROW(parlens::refine_homography_photometric(moving, fixed,
                                                         Homography::identity()));
    // different shapes are legal (the fixed frame defines the domain), but
    // empty images are not
    Image empty;
    CHECK_THROWS_AS(
        parlens::refine_homography_photometric(empty, fixed, Homography::identity()),
        parlens::Error);
}

} // TEST_SUITE
