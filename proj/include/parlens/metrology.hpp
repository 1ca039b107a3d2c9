#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parlens/psf.hpp"

namespace parlens {

/// Radially averaged PSF autocorrelation with the resolution and sidelobe
/// metrics derived from it. values[0] == 1 by normalization; fwhm is the
/// full width of the main lobe at half maximum (NaN with fwhm_defined ==
/// false when the profile never falls below 0.5).
struct AutocorrelationProfile {
    std::vector<double> lags;    // bin left edges, pixels
    std::vector<double> values;  // normalized, peak == 1
    double fwhm = 0.0;
    bool fwhm_defined = false;
    double main_lobe_radius = 0.0;      // first local minimum after the peak, px
    double peak_sidelobe_ratio = 0.0;   // max |value| beyond the main lobe
    double peak_sidelobe_lag = 0.0;     // where that maximum sits, px
    double sidelobe_energy_fraction = 0.0;

    nlohmann::json to_json() const;
};

/// Mean-subtracted full linear autocorrelation via the frequency domain,
/// normalized so the central peak is 1. Output extent is 2*extent - 1 per
/// axis (odd, peak at the exact center); even-symmetric by construction.
/// Multi-channel PSFs are collapsed to their channel mean first.
/// Throws ValueError for a constant (zero-variance) PSF.
Image autocorrelate(const PointSpreadFunction& psf);

/// Annular-average profile about the center of a centered autocorrelation.
/// fwhm interpolates the first 0.5 crossing; the main lobe ends at the
/// first local minimum after the peak.
AutocorrelationProfile radial_profile(const Image& autocorr, double bin_width = 1.0);

/// Per-metric ordering of two imagers: smaller fwhm reads as higher
/// resolution, smaller sidelobe metrics as higher SNR. No aggregate winner
/// is invented; each metric reports its own verdict.
struct ImagerComparison {
    std::string label_a;
    std::string label_b;
    AutocorrelationProfile profile_a;
    AutocorrelationProfile profile_b;

    // -1: a better, +1: b better, 0: tie (within 1e-12)
    int fwhm_order = 0;
    int peak_sidelobe_order = 0;
    int sidelobe_energy_order = 0;

    nlohmann::json to_json() const;
};

ImagerComparison compare_imagers(const PointSpreadFunction& a, const PointSpreadFunction& b);

/// Pixelwise image fidelity. psnr_db is referenced to peak 1.0 and is
/// +infinity when mse == 0.
struct FidelityReport {
    double mse = 0.0;
    double psnr_db = 0.0;
    std::vector<double> mse_per_channel;
    std::vector<double> psnr_per_channel;

    nlohmann::json to_json() const;
};

FidelityReport fidelity(const Image& recon, const Image& ground_truth);

/// CSV export, columns "lag_px,value".
void write_profile_csv(const std::string& path, const AutocorrelationProfile& profile);

/// Aligned CSV for plotting two profiles: "lag_px,value_a,value_b" (rows up
/// to the shorter profile's length padded with empty cells).
void write_comparison_csv(const std::string& path, const ImagerComparison& cmp);

} // namespace parlens
