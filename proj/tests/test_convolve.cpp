#include <doctest.h>

#include <random>

#include "parlens/convolve.hpp"
#include "parlens/psf.hpp"
#include "oracles.hpp"

using parlens::Image;
using parlens::PixelGrid;
using parlens::Shape;

namespace {

double inner(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.sample_count(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

parlens::PointSpreadFunction random_psf(std::mt19937_64& rng, int rows, int cols) {
    // strictly positive so the unit-sum normalization is safe
    return parlens::make_psf(oracle::random_image(rng, rows, cols, 1, 0.05, 1.0), "rand");
}

} // namespace

TEST_SUITE("convolve") {

TEST_CASE("next smooth size is the least 5-smooth bound") {
    CHECK(parlens::next_smooth_size(1) == 1);
    CHECK(parlens::next_smooth_size(5) == 5);
    CHECK(parlens::next_smooth_size(7) == 8);
    CHECK(parlens::next_smooth_size(11) == 12);
    CHECK(parlens::next_smooth_size(13) == 15);
    CHECK(parlens::next_smooth_size(97) == 100);
    CHECK(parlens::next_smooth_size(101) == 108);
}

TEST_CASE("full extent adds kernel minus one") {
    CHECK(parlens::full_extent({6, 6}, {3, 3}) == Shape{8, 8});
    CHECK(parlens::full_extent({1, 5}, {4, 1}) == Shape{4, 5});
}

TEST_CASE("fft convolution equals the direct sum on random instances") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> scene_dim(1, 8);
    std::uniform_int_distribution<int> kernel_dim(1, 5);
    for (int trial = 0; trial < 200; ++trial) {
        const int channels = trial % 3 == 0 ? 3 : 1;
        const Image scene =
            oracle::random_image(rng, scene_dim(rng), scene_dim(rng), channels);
        const auto psf = random_psf(rng, kernel_dim(rng), kernel_dim(rng));
        const Image fft = parlens::convolve_linear(scene, psf);
        const Image direct = oracle::direct_convolve(scene, psf.image);
        REQUIRE(fft.shape() == direct.shape());
        CHECK(oracle::max_rel_diff(fft, direct) < 1e-10);
    }
}

TEST_CASE("convolution clamps only round-off negatives") {
    // all-positive inputs: any exact-zero output samples may come out of the
    // FFT as tiny negatives; those must be snapped to zero, nothing else.
    std::mt19937_64 rng(22);
    const Image scene = oracle::random_image(rng, 6, 6, 1, 0.5, 1.0);
    const auto psf = random_psf(rng, 3, 3);
    const Image out = parlens::convolve_linear(scene, psf);
    CHECK(out.min() >= 0.0);
}

TEST_CASE("forward crops the requested sensor window") {
    std::mt19937_64 rng(23);
    const Image scene = oracle::random_image(rng, 7, 6, 1);
    const auto psf = random_psf(rng, 3, 4);
    const Shape full = parlens::full_extent(scene.shape(), psf.image.shape());
    const PixelGrid window = parlens::centered_window(full, {5, 5});
    const Image meas = parlens::forward(scene, psf, window);
    const Image expect = oracle::take_window(oracle::direct_convolve(scene, psf.image), window);
    CHECK(oracle::max_rel_diff(meas, expect) < 1e-10);
}

TEST_CASE("adjoint passes the inner-product test on random instances") {
    std::mt19937_64 rng(24);
    std::uniform_int_distribution<int> scene_dim(2, 8);
    std::uniform_int_distribution<int> kernel_dim(1, 5);
    for (int trial = 0; trial < 50; ++trial) {
        const Shape scene_shape{scene_dim(rng), scene_dim(rng)};
        const auto psf = random_psf(rng, kernel_dim(rng), kernel_dim(rng));
        const Shape full = parlens::full_extent(scene_shape, psf.image.shape());
        std::uniform_int_distribution<int> win_rows(1, full.rows);
        std::uniform_int_distribution<int> win_cols(1, full.cols);
        const PixelGrid window =
            parlens::centered_window(full, {win_rows(rng), win_cols(rng)});

        const Image x = oracle::random_image(rng, scene_shape.rows, scene_shape.cols, 1, -1.0, 1.0);
        const Image y = oracle::random_image(rng, window.rows, window.cols, 1, -1.0, 1.0);

        const Image ax = parlens::forward(x, psf, window);
        const Image aty = parlens::adjoint(y, psf, window, scene_shape);
        const double lhs = inner(ax, y);
        const double rhs = inner(x, aty);
        CHECK(std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}) < 1e-8);
    }
}

TEST_CASE("adjoint equals the dense operator transpose") {
    std::mt19937_64 rng(25);
    const Shape scene_shape{5, 4};
    const auto psf = random_psf(rng, 3, 3);
    const Shape full = parlens::full_extent(scene_shape, psf.image.shape());
    const PixelGrid window = parlens::centered_window(full, {4, 4});
    const Eigen::MatrixXd a = oracle::forward_matrix(psf.image, scene_shape, window);

    const Image y = oracle::random_image(rng, window.rows, window.cols, 1, -1.0, 1.0);
    const Eigen::VectorXd expect = a.transpose() * oracle::flatten(y);
    const Image aty = parlens::adjoint(y, psf, window, scene_shape);
    const Eigen::VectorXd got = oracle::flatten(aty);
    CHECK((expect - got).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mismatched channel counts are rejected") {
    std::mt19937_64 rng(26);
    const Image scene = oracle::random_image(rng, 4, 4, 3);
    const auto psf = random_psf(rng, 3, 3);
    // single-channel kernels broadcast over color scenes; that must work
    CHECK_NOTHROW(parlens::convolve_linear(scene, psf));
}

} // TEST_SUITE
