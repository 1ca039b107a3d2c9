#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "parlens/metrology.hpp"
#include "parlens/psf.hpp"
#include "oracles.hpp"

using parlens::AutocorrelationProfile;
using parlens::Image;
using parlens::PointSpreadFunction;

namespace {

PointSpreadFunction two_impulse_psf(int extent, int separation_px) {
    Image img(extent, extent, 1, 0.0);
    const int c = extent / 2;
    img.at(c, c - separation_px / 2) = 1.0;
    img.at(c, c - separation_px / 2 + separation_px) = 1.0;
    return parlens::make_psf(img, "two_impulse");
}

} // namespace

TEST_SUITE("metrology") {

TEST_CASE("frequency-domain autocorrelation equals the direct lag sum") {
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<int> dim(2, 8);
    for (int trial = 0; trial < 60; ++trial) {
        const int channels = trial % 4 == 0 ? 3 : 1;
        const auto psf = parlens::make_psf(
            oracle::random_image(rng, dim(rng), dim(rng), channels, 0.05, 1.0), "rand");
        const Image fast = parlens::autocorrelate(psf);
        const Image slow = oracle::lag_sum_autocorrelation(psf.image);
        REQUIRE(fast.shape() == slow.shape());
        CHECK(fast.channels() == 1);
        CHECK(oracle::max_rel_diff(fast, slow) < 1e-10);
    }
}

TEST_CASE("autocorrelation is exactly even with a unit central peak") {
    std::mt19937_64 rng(52);
    const auto psf =
        parlens::make_psf(oracle::random_image(rng, 7, 6, 1, 0.05, 1.0), "rand");
    const Image ac = parlens::autocorrelate(psf);
    const auto& d = ac.data();
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n / 2; ++i) CHECK(d[i] == d[n - 1 - i]);
    CHECK(ac.at(ac.height() / 2, ac.width() / 2) == doctest::Approx(1.0));
    CHECK(ac.max() <= 1.0 + 1e-12);
}

TEST_CASE("a constant psf has no autocorrelation signal to analyze") {
    const auto flat = parlens::make_psf(Image(5, 5, 1, 0.3), "flat");
    CHECK_THROWS_AS(parlens::autocorrelate(flat), parlens::ValueError);
}

TEST_CASE("delta psf: narrow main lobe, negligible sidelobes") {
    const auto delta = parlens::delta_psf({15, 15});
    const AutocorrelationProfile profile =
        parlens::radial_profile(parlens::autocorrelate(delta), 1.0);
    REQUIRE(profile.fwhm_defined);
    CHECK(profile.fwhm <= 2.0);
    CHECK(profile.peak_sidelobe_ratio < 0.02);
    CHECK(profile.values.front() == doctest::Approx(1.0));
}

TEST_CASE("two-impulse psf shows a sidelobe at the impulse separation") {
    const int separation = 6;
    const AutocorrelationProfile profile = parlens::radial_profile(
        parlens::autocorrelate(two_impulse_psf(21, separation)), 1.0);
    CHECK(std::abs(profile.peak_sidelobe_lag - separation) <= 1.0);
    // the impulse-pair correlation is diluted over its radius ring but must
    // still dominate every other ring
    CHECK(profile.peak_sidelobe_ratio > 0.005);
}

TEST_CASE("fwhm interpolates the half crossing on a synthetic cone") {
    // autocorrelation-like cone: value 1 - r/8, crossing 0.5 at r = 4
    const int n = 33;
    Image cone(n, n, 1, 0.0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const double rad = std::hypot(r - n / 2, c - n / 2);
            cone.at(r, c) = std::max(0.0, 1.0 - rad / 8.0);
        }
    const AutocorrelationProfile profile = parlens::radial_profile(cone, 1.0);
    REQUIRE(profile.fwhm_defined);
    // lags are bin left edges while each ring averages radii near the bin
    // center, so the interpolated crossing sits ~0.5 px low: fwhm ~ 2*(4-0.5)
    CHECK(profile.fwhm == doctest::Approx(7.0).epsilon(0.1));
}

TEST_CASE("radial profile rejects non-square or even autocorrelation inputs") {
    CHECK_THROWS_AS(parlens::radial_profile(Image(4, 5, 1, 0.1), 1.0), parlens::ShapeError);
    CHECK_THROWS_AS(parlens::radial_profile(Image(4, 4, 1, 0.1), 1.0), parlens::ShapeError);
}

TEST_CASE("imager comparison orders sharp vs diffuse responses") {
    const auto sharp = parlens::synth_lenslet_psf({21, 21}, 5, 0.6, 3);
    const auto diffuse = parlens::synth_diffuser_psf({21, 21}, 60, 2.0, 3);
    const parlens::ImagerComparison cmp = parlens::compare_imagers(sharp, diffuse);
    CHECK(cmp.label_a == sharp.label);
    // the near-delta response autocorrelates to a narrower main lobe
    CHECK(cmp.fwhm_order == -1);

    const parlens::ImagerComparison self = parlens::compare_imagers(sharp, sharp);
    CHECK(self.fwhm_order == 0);
    CHECK(self.peak_sidelobe_order == 0);
    CHECK(self.sidelobe_energy_order == 0);
}

TEST_CASE("fidelity reports mse and peak-1 psnr") {
    Image a(4, 4, 1, 0.5);
    Image b(4, 4, 1, 0.6);
    const parlens::FidelityReport rep = parlens::fidelity(a, b);
    CHECK(rep.mse == doctest::Approx(0.01));
    CHECK(rep.psnr_db == doctest::Approx(20.0));

    const parlens::FidelityReport same = parlens::fidelity(a, a);
    CHECK(same.mse == 0.0);
    CHECK(std::isinf(same.psnr_db));

    Image c(4, 5, 1, 0.5);
    CHECK_THROWS_AS(parlens::fidelity(a, c), parlens::ShapeError);
}

TEST_CASE("profile csv uses the documented columns") {
    namespace fs = std::filesystem;
    fs::create_directories("scratch/metrology");
    const auto delta = parlens::delta_psf({9, 9});
    const AutocorrelationProfile profile =
        parlens::radial_profile(parlens::autocorrelate(delta), 1.0);
    const std::string path = "scratch/metrology/profile.csv";
    parlens::write_profile_csv(path, profile);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "lag_px,value");
    std::string row;
    std::getline(in, row);
    CHECK(row.substr(0, 2) == "0,");
}

} // TEST_SUITE
