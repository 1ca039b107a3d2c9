#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "parlens/homography.hpp"
#include "oracles.hpp"

using parlens::Homography;
using parlens::Image;
using parlens::Point2;

namespace {

Homography sample_homography(std::mt19937_64& rng) {
    // mild projective transform: rotation + translation + small perspective
    std::uniform_real_distribution<double> angle(-0.3, 0.3);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    std::uniform_real_distribution<double> persp(-1e-4, 1e-4);
    const double a = angle(rng);
    Homography h;
    h.at(0, 0) = std::cos(a);
    h.at(0, 1) = -std::sin(a);
    h.at(0, 2) = shift(rng);
    h.at(1, 0) = std::sin(a);
    h.at(1, 1) = std::cos(a);
    h.at(1, 2) = shift(rng);
    h.at(2, 0) = persp(rng);
    h.at(2, 1) = persp(rng);
    h.at(2, 2) = 1.0;
    return h;
}

std::vector<Point2> sample_points(std::mt19937_64& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> coord(lo, hi);
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pts.push_back({coord(rng), coord(rng)});
    return pts;
}

std::vector<Point2> map_points(const std::vector<Point2>& pts, const Homography& h) {
    std::vector<Point2> out;
    out.reserve(pts.size());
    for (const Point2& p : pts) out.push_back(h.apply(p));
    return out;
}

double max_reprojection_px(const Homography& h, const std::vector<Point2>& src,
                           const std::vector<Point2>& dst) {
    double worst = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Point2 q = h.apply(src[i]);
        worst = std::max(worst, std::hypot(q.x - dst[i].x, q.y - dst[i].y));
    }
    return worst;
}

} // namespace

TEST_SUITE("homography") {

TEST_CASE("apply, inverse, determinant, compose") {
    std::mt19937_64 rng(61);
    const Homography h = sample_homography(rng);
    const Point2 p{3.0, -2.0};
    const Point2 q = h.apply(p);
    const Point2 back = h.inverse().apply(q);
    CHECK(back.x == doctest::Approx(p.x).epsilon(1e-12));
    CHECK(back.y == doctest::Approx(p.y).epsilon(1e-12));
    CHECK(h.determinant() != 0.0);

    const Homography h2 = sample_homography(rng);
    // compose(a, b) applies b first
    const Point2 via_compose = parlens::compose(h2, h).apply(p);
    const Point2 via_chain = h2.apply(h.apply(p));
    CHECK(via_compose.x == doctest::Approx(via_chain.x).epsilon(1e-12));
    CHECK(via_compose.y == doctest::Approx(via_chain.y).epsilon(1e-12));

    Homography singular;
    singular.m = {1, 0, 0, 2, 0, 0, 0, 0, 1};
    CHECK_THROWS_AS(singular.inverse(), parlens::ValueError);
}

TEST_CASE("dlt on identity correspondences returns the identity") {
    std::mt19937_64 rng(62);
    const std::vector<Point2> pts = sample_points(rng, 12, 0.0, 100.0);
    Homography h = parlens::estimate_homography_dlt(pts, pts);
    h.normalize();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(h.at(r, c) - (r == c ? 1.0 : 0.0)) < 1e-10);
}

TEST_CASE("dlt recovers a random homography from 20 exact points") {
    std::mt19937_64 rng(63);
    for (int trial = 0; trial < 20; ++trial) {
        const Homography truth = sample_homography(rng);
        const std::vector<Point2> src = sample_points(rng, 20, 0.0, 200.0);
        const std::vector<Point2> dst = map_points(src, truth);
        const Homography est = parlens::estimate_homography_dlt(src, dst);
        CHECK(max_reprojection_px(est, src, dst) < 1e-8);
    }
}

TEST_CASE("dlt is invariant to uniform coordinate scaling") {
    std::mt19937_64 rng(64);
    const Homography truth = sample_homography(rng);
    const std::vector<Point2> src = sample_points(rng, 15, 0.0, 50.0);
    const std::vector<Point2> dst = map_points(src, truth);

    std::vector<Point2> src_scaled, dst_scaled;
    for (const Point2& p : src) src_scaled.push_back({p.x * 37.0, p.y * 37.0});
    for (const Point2& p : dst) dst_scaled.push_back({p.x * 37.0, p.y * 37.0});

    Homography a = parlens::estimate_homography_dlt(src, dst);
    const Homography b = parlens::estimate_homography_dlt(src_scaled, dst_scaled);
    // undo the similarity conjugation: H_scaled = S H S^{-1}
    Homography s;
    s.m = {37.0, 0, 0, 0, 37.0, 0, 0, 0, 1.0};
    Homography conj = parlens::compose(s, parlens::compose(a, s.inverse()));
    conj.normalize();
    Homography bn = b;
    bn.normalize();
    for (int i = 0; i < 9; ++i) CHECK(std::abs(conj.m[i] - bn.m[i]) < 1e-9);
}

TEST_CASE("dlt rejects degenerate inputs") {
    std::vector<Point2> collinear;
    for (int i = 0; i < 8; ++i) collinear.push_back({static_cast<double>(i), 2.0 * i});
    CHECK_THROWS_AS(parlens::estimate_homography_dlt(collinear, collinear),
                    parlens::ConvergenceError);

    std::vector<Point2> three{{0, 0}, {1, 0}, {0, 1}};
    CHECK_THROWS_AS(parlens::estimate_homography_dlt(three, three), parlens::ValueError);
    std::vector<Point2> four{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    std::vector<Point2> five = four;
    five.push_back({2, 2});
    CHECK_THROWS_AS(parlens::estimate_homography_dlt(four, five), parlens::ValueError);
}

TEST_CASE("ransac survives 30% gross outliers") {
    std::mt19937_64 rng(65);
    const Homography truth = sample_homography(rng);
    std::vector<Point2> src = sample_points(rng, 40, 0.0, 200.0);
    std::vector<Point2> dst = map_points(src, truth);

    // corrupt 12 of 40 correspondences with gross errors
    std::uniform_real_distribution<double> junk(-300.0, 300.0);
    for (int i = 0; i < 12; ++i) {
        dst[static_cast<std::size_t>(i) * 3] = {junk(rng), junk(rng)};
    }

    parlens::RansacOptions options;
    options.inlier_threshold_px = 0.5;
    const parlens::RansacResult result =
        parlens::estimate_homography_ransac(src, dst, options);

    // every genuine correspondence must reproject essentially exactly
    double worst = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (i % 3 == 0 && i < 36) continue;  // corrupted entries
        const Point2 q = result.h.apply(src[i]);
        worst = std::max(worst, std::hypot(q.x - dst[i].x, q.y - dst[i].y));
    }
    CHECK(worst < 1e-6);
    CHECK(result.inliers.size() >= 28);
}

TEST_CASE("ransac reports failure when no model explains the data") {
    std::mt19937_64 rng(66);
    const std::vector<Point2> src = sample_points(rng, 20, 0.0, 100.0);
    const std::vector<Point2> dst = sample_points(rng, 20, 0.0, 100.0);
    parlens::RansacOptions options;
    options.inlier_threshold_px = 1e-9;
    options.max_iterations = 50;
    CHECK_THROWS_AS(parlens::estimate_homography_ransac(src, dst, options),
                    parlens::ConvergenceError);
}

TEST_CASE("warping with the identity reproduces the image") {
    std::mt19937_64 rng(67);
    const Image img = oracle::random_image(rng, 12, 10, 1);
    const Image out = parlens::warp(img, Homography::identity(), img.shape());
    CHECK(oracle::max_abs_diff(out, img) < 1e-14);
}

TEST_CASE("warp by a pure translation shifts samples and zero-fills") {
    Image img(4, 4, 1, 0.0);
    img.at(1, 1) = 1.0;
    // maps (x, y) -> (x+1, y+2): the sample moves one column right, two rows down
    Homography t;
    t.m = {1, 0, 1, 0, 1, 2, 0, 0, 1};
    const Image out = parlens::warp(img, t, img.shape());
    CHECK(out.at(3, 2) == doctest::Approx(1.0));
    CHECK(out.at(1, 1) == doctest::Approx(0.0));

    const parlens::WarpResult wr = parlens::warp_with_mask(img, t, img.shape());
    CHECK(wr.mask.at(0, 0) == 0.0);  // pulls from outside the source
    CHECK(wr.mask.at(3, 2) == 1.0);
}

TEST_CASE("warp composition matches the composed transform away from borders") {
    std::mt19937_64 rng(68);
    // Gently varying image: bilinear resampling error scales with the local
    // curvature, and the two-step path resamples twice.
    Image img(40, 40, 1);
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 40; ++c)
            img.at(r, c) = 0.5 + 0.4 * std::sin(r * 0.12) * std::cos(c * 0.1);

    Homography h1;
    h1.m = {1, 0, 1.3, 0, 1, -0.7, 0, 0, 1};
    Homography h2;
    const double a = 0.05;
    h2.m = {std::cos(a), -std::sin(a), 0.4, std::sin(a), std::cos(a), 0.9, 0, 0, 1};

    const Image two_step = parlens::warp(parlens::warp(img, h1, img.shape()), h2, img.shape());
    const Image one_step = parlens::warp(img, parlens::compose(h2, h1), img.shape());

    double worst = 0.0;
    for (int r = 4; r < 36; ++r)
        for (int c = 4; c < 36; ++c)
            worst = std::max(worst, std::abs(two_step.at(r, c) - one_step.at(r, c)));
    CHECK(worst < 1e-2);
}

TEST_CASE("warp inverse round trip is tight on the interior") {
    std::mt19937_64 rng(69);
    Image img(32, 32, 1);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c)
            img.at(r, c) = 0.5 + 0.3 * std::sin(r * 0.4 + c * 0.2);

    Homography t;
    t.m = {1, 0, 0.5, 0, 1, -0.25, 0, 0, 1};  // sub-pixel shift
    const Image there = parlens::warp(img, t, img.shape());
    const Image back = parlens::warp(there, t.inverse(), img.shape());
    double worst = 0.0;
    for (int r = 2; r < 30; ++r)
        for (int c = 2; c < 30; ++c)
            worst = std::max(worst, std::abs(back.at(r, c) - img.at(r, c)));
    // two bilinear passes smooth the signal; this bounds the smoothing, it
    // is not an exactness claim
    CHECK(worst < 0.05);
}

TEST_CASE("json round trip and csv export") {
    std::mt19937_64 rng(70);
    Homography h = sample_homography(rng);
    const Homography back = Homography::from_json(h.to_json());
    for (int i = 0; i < 9; ++i) CHECK(back.m[i] == h.m[i]);

    namespace fs = std::filesystem;
    fs::create_directories("scratch/homography");
    const std::string path = "scratch/homography/pairs.csv";
    parlens::write_correspondences_csv(path, {{1, 2}}, {{3, 4}});
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x_src,y_src,x_dst,y_dst");
}

} // TEST_SUITE
