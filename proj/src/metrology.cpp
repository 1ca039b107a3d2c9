#include "parlens/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "parlens/convolve.hpp"

namespace parlens {

using nlohmann::json;

Image autocorrelate(const PointSpreadFunction& psf) {
    psf.validate();
    const Image& src = psf.image;

    // Collapse colour PSFs to their channel mean; the analysis is geometric.
    Image plane(src.height(), src.width(), 1, 0.0);
    for (int r = 0; r < src.height(); ++r)
        for (int c = 0; c < src.width(); ++c) {
            double acc = 0.0;
            for (int k = 0; k < src.channels(); ++k) acc += src.at(r, c, k);
            plane.at(r, c) = acc / src.channels();
        }

    const double mean = plane.sum() / static_cast<double>(plane.sample_count());
    for (double& v : plane.data()) v -= mean;

    double variance = 0.0;
    for (double v : plane.data()) variance += v * v;
    // Scale-aware flatness gate: the mean subtraction above leaves round-off
    // residue of order count * (eps * mean)^2 on an exactly constant kernel,
    // so comparing against zero would let flat inputs through.
    const double flat_floor =
        static_cast<double>(plane.sample_count()) * mean * mean * 1e-24;
    if (variance <= flat_floor)
        throw ValueError("autocorrelate: constant PSF has no structure");

    // Autocorrelation = correlation of the plane with itself = convolution
    // with its own flip; lag 0 lands at the exact center of the odd output.
    Image flipped(plane.height(), plane.width(), 1, 0.0);
    for (int r = 0; r < plane.height(); ++r)
        for (int c = 0; c < plane.width(); ++c)
            flipped.at(r, c) = plane.at(plane.height() - 1 - r, plane.width() - 1 - c);

    Image out = convolve_linear_raw(plane, flipped);

    // Round-off breaks the exact evenness of c(d) = c(-d); averaging the
    // mirrored pairs restores it without moving any value past round-off.
    const int n = static_cast<int>(out.data().size());
    for (int i = 0; i < n / 2; ++i) {
        const double v = 0.5 * (out.data()[i] + out.data()[n - 1 - i]);
        out.data()[i] = v;
        out.data()[n - 1 - i] = v;
    }

    const int cr = out.height() / 2;
    const int cc = out.width() / 2;
    const double peak = out.at(cr, cc);
    if (peak <= 0.0)
        throw ValueError("autocorrelate: degenerate peak");
    out *= 1.0 / peak;
    return out;
}

AutocorrelationProfile radial_profile(const Image& autocorr, double bin_width) {
    if (autocorr.channels() != 1)
        throw ShapeError("radial_profile: expected single-channel autocorrelation");
    if (autocorr.height() % 2 == 0 || autocorr.width() % 2 == 0)
        throw ShapeError("radial_profile: expected odd (centered) extent");
    if (bin_width <= 0.0) throw ValueError("radial_profile: bin width must be positive");

    const int cr = autocorr.height() / 2;
    const int cc = autocorr.width() / 2;
    const double max_radius = std::hypot(cr, cc);
    const int bins = static_cast<int>(std::floor(max_radius / bin_width)) + 1;

    std::vector<double> sums(bins, 0.0);
    std::vector<std::size_t> counts(bins, 0);
    for (int r = 0; r < autocorr.height(); ++r)
        for (int c = 0; c < autocorr.width(); ++c) {
            const double radius = std::hypot(r - cr, c - cc);
            const int bin = static_cast<int>(std::floor(radius / bin_width));
            sums[bin] += autocorr.at(r, c);
            ++counts[bin];
        }

    AutocorrelationProfile p;
    for (int i = 0; i < bins; ++i) {
        if (counts[i] == 0) continue;
        p.lags.push_back(i * bin_width);
        p.values.push_back(sums[i] / static_cast<double>(counts[i]));
    }

    // FWHM: linear interpolation of the first 0.5 crossing.
    p.fwhm = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 1; i < p.values.size(); ++i) {
        if (p.values[i] < 0.5) {
            const double v0 = p.values[i - 1];
            const double v1 = p.values[i];
            const double frac = (v0 - 0.5) / (v0 - v1);
            const double half_radius = p.lags[i - 1] + frac * (p.lags[i] - p.lags[i - 1]);
            p.fwhm = 2.0 * half_radius;
            p.fwhm_defined = true;
            break;
        }
    }

    // Main lobe ends at the first local minimum after the peak.
    std::size_t lobe_end = p.values.size() - 1;
    for (std::size_t i = 1; i + 1 < p.values.size(); ++i) {
        if (p.values[i] <= p.values[i - 1] && p.values[i] <= p.values[i + 1]) {
            lobe_end = i;
            break;
        }
    }
    p.main_lobe_radius = p.lags[lobe_end];

    double peak_side = 0.0, peak_lag = 0.0;
    double inside = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double v2 = p.values[i] * p.values[i];
        if (i <= lobe_end) {
            inside += v2;
        } else {
            outside += v2;
            if (std::abs(p.values[i]) > peak_side) {
                peak_side = std::abs(p.values[i]);
                peak_lag = p.lags[i];
            }
        }
    }
    p.peak_sidelobe_ratio = peak_side;
    p.peak_sidelobe_lag = peak_lag;
    const double total = inside + outside;
    p.sidelobe_energy_fraction = total > 0.0 ? outside / total : 0.0;
    return p;
}

json AutocorrelationProfile::to_json() const {
    json j;
    j["profile_kind"] = "radial_average";
    j["lags_px"] = lags;
    j["values"] = values;
    if (fwhm_defined)
        j["fwhm_px"] = fwhm;
    else
        j["fwhm_px"] = nullptr;  // profile never fell below 0.5
    j["fwhm_defined"] = fwhm_defined;
    j["main_lobe_radius_px"] = main_lobe_radius;
    j["peak_sidelobe_ratio"] = peak_sidelobe_ratio;
    j["peak_sidelobe_lag_px"] = peak_sidelobe_lag;
    j["sidelobe_energy_fraction"] = sidelobe_energy_fraction;
    return j;
}

namespace {

int order_of(double a, double b) {
    if (std::abs(a - b) <= 1e-12) return 0;
    return a < b ? -1 : 1;
}

} // namespace

ImagerComparison compare_imagers(const PointSpreadFunction& a, const PointSpreadFunction& b) {
    ImagerComparison cmp;
    cmp.label_a = a.label;
    cmp.label_b = b.label;
    cmp.profile_a = radial_profile(autocorrelate(a));
    cmp.profile_b = radial_profile(autocorrelate(b));

    const double fa = cmp.profile_a.fwhm_defined ? cmp.profile_a.fwhm
                                                 : std::numeric_limits<double>::infinity();
    const double fb = cmp.profile_b.fwhm_defined ? cmp.profile_b.fwhm
                                                 : std::numeric_limits<double>::infinity();
    cmp.fwhm_order = order_of(fa, fb);
    cmp.peak_sidelobe_order = order_of(cmp.profile_a.peak_sidelobe_ratio, cmp.profile_b.peak_sidelobe_ratio);
    cmp.sidelobe_energy_order =
        order_of(cmp.profile_a.sidelobe_energy_fraction, cmp.profile_b.sidelobe_energy_fraction);
    return cmp;
}

namespace {

json order_json(int order, const std::string& a, const std::string& b) {
    if (order < 0) return a;
    if (order > 0) return b;
    return "tie";
}

} // namespace

json ImagerComparison::to_json() const {
    json j;
    j["a"] = label_a;
    j["b"] = label_b;
    j["profiles"] = {{"a", profile_a.to_json()}, {"b", profile_b.to_json()}};
    j["higher_resolution"] = order_json(fwhm_order, label_a, label_b);
    j["lower_peak_sidelobe"] = order_json(peak_sidelobe_order, label_a, label_b);
    j["lower_sidelobe_energy"] = order_json(sidelobe_energy_order, label_a, label_b);
    return j;
}

FidelityReport fidelity(const Image& recon, const Image& ground_truth) {
    if (recon.shape() != ground_truth.shape() || recon.channels() != ground_truth.channels())
        throw ShapeError("fidelity: shape mismatch (register first)");

    FidelityReport rep;
    const int ch = recon.channels();
    rep.mse_per_channel.assign(ch, 0.0);
    for (int r = 0; r < recon.height(); ++r)
        for (int c = 0; c < recon.width(); ++c)
            for (int k = 0; k < ch; ++k) {
                const double d = recon.at(r, c, k) - ground_truth.at(r, c, k);
                rep.mse_per_channel[k] += d * d;
            }
    const double n = static_cast<double>(recon.height()) * recon.width();
    double total = 0.0;
    rep.psnr_per_channel.resize(ch);
    for (int k = 0; k < ch; ++k) {
        rep.mse_per_channel[k] /= n;
        total += rep.mse_per_channel[k];
        rep.psnr_per_channel[k] = rep.mse_per_channel[k] > 0.0
                                      ? 10.0 * std::log10(1.0 / rep.mse_per_channel[k])
                                      : std::numeric_limits<double>::infinity();
    }
    rep.mse = total / ch;
    rep.psnr_db = rep.mse > 0.0 ? 10.0 * std::log10(1.0 / rep.mse)
                                : std::numeric_limits<double>::infinity();
    return rep;
}

json FidelityReport::to_json() const {
    json j;
    j["mse"] = mse;
    j["psnr_db"] = std::isinf(psnr_db) ? json(nullptr) : json(psnr_db);
    j["identical"] = mse == 0.0;
    j["mse_per_channel"] = mse_per_channel;
    json psnrs = json::array();
    for (double v : psnr_per_channel) psnrs.push_back(std::isinf(v) ? json(nullptr) : json(v));
    j["psnr_db_per_channel"] = psnrs;
    return j;
}

void write_profile_csv(const std::string& path, const AutocorrelationProfile& profile) {
    std::ofstream out(path);
    if (!out) throw IoError("write_profile_csv: cannot open " + path);
    out << "lag_px,value\n";
    out.precision(17);
    for (std::size_t i = 0; i < profile.lags.size(); ++i)
        out << profile.lags[i] << "," << profile.values[i] << "\n";
}

void write_comparison_csv(const std::string& path, const ImagerComparison& cmp) {
    std::ofstream out(path);
    if (!out) throw IoError("write_comparison_csv: cannot open " + path);
    out << "lag_px,value_a,value_b\n";
    out.precision(17);
    const std::size_t n = std::max(cmp.profile_a.lags.size(), cmp.profile_b.lags.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i < cmp.profile_a.lags.size())
            out << cmp.profile_a.lags[i];
        else if (i < cmp.profile_b.lags.size())
            out << cmp.profile_b.lags[i];
        out << ",";
        if (i < cmp.profile_a.values.size()) out << cmp.profile_a.values[i];
        out << ",";
        if (i < cmp.profile_b.values.size()) out << cmp.profile_b.values[i];
        out << "\n";
    }
}

} // namespace parlens
