#include "parlens/psf.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "parlens/image_io.hpp"

namespace parlens {

using nlohmann::json;

void PointSpreadFunction::normalize(PsfNormalization target) {
    validate();
    if (target == PsfNormalization::raw) {
        normalization = target;
        return;
    }
    const int ch = image.channels();
    for (int k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (int r = 0; r < image.height(); ++r)
            for (int c = 0; c < image.width(); ++c) {
                const double v = image.at(r, c, k);
                acc += target == PsfNormalization::unit_sum ? v : v * v;
            }
        if (target == PsfNormalization::unit_energy) acc = std::sqrt(acc);
        if (acc <= 0.0)
            throw ValueError("PSF normalize: channel " + std::to_string(k) + " is all zero");
        for (int r = 0; r < image.height(); ++r)
            for (int c = 0; c < image.width(); ++c) image.at(r, c, k) /= acc;
    }
    normalization = target;
}

void PointSpreadFunction::validate() const {
    if (image.empty()) throw ValueError("PSF: empty image");
    if (!image.all_finite()) throw ValueError("PSF: non-finite samples");
    if (image.min() < 0.0) throw ValueError("PSF: negative samples");
}

PointSpreadFunction make_psf(Image img, std::string label, PsfNormalization norm) {
    PointSpreadFunction psf;
    psf.support_shape = img.shape();
    psf.image = std::move(img);
    psf.label = std::move(label);
    psf.validate();
    psf.normalize(norm);
    return psf;
}

PointSpreadFunction load_psf(const std::string& pfm_path) {
    PointSpreadFunction psf;
    psf.image = load_image(pfm_path);
    psf.support_shape = psf.image.shape();
    psf.label = pfm_path;

    std::ifstream sidecar(pfm_path + ".json");
    if (sidecar) {
        try {
            json meta = json::parse(sidecar);
            psf.label = meta.value("label", psf.label);
            psf.normalization =
                psf_normalization_from_string(meta.value("normalization", std::string("raw")));
            if (meta.contains("support"))
                psf.support_shape = {meta["support"][0].get<int>(), meta["support"][1].get<int>()};
        } catch (const json::exception& e) {
            throw CorruptFileError(pfm_path + ".json: " + e.what());
        }
    }
    psf.validate();
    return psf;
}

void save_psf(const PointSpreadFunction& psf, const std::string& pfm_path) {
    psf.validate();
    save_image(psf.image, pfm_path, ImageFileFormat::pfm);
    json meta;
    meta["label"] = psf.label;
    meta["normalization"] = to_string(psf.normalization);
    meta["support"] = {psf.support_shape.rows, psf.support_shape.cols};
    meta["channels"] = psf.image.channels();
    std::ofstream sidecar(pfm_path + ".json");
    if (!sidecar) throw IoError("save_psf: cannot open sidecar for " + pfm_path);
    sidecar << meta.dump(2) << "\n";
}

namespace {

void splat_gaussian(Image& img, double row, double col, double sigma, double amplitude) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    const int r_lo = std::max(0, static_cast<int>(std::floor(row)) - radius);
    const int r_hi = std::min(img.height() - 1, static_cast<int>(std::ceil(row)) + radius);
    const int c_lo = std::max(0, static_cast<int>(std::floor(col)) - radius);
    const int c_hi = std::min(img.width() - 1, static_cast<int>(std::ceil(col)) + radius);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = r_lo; r <= r_hi; ++r)
        for (int c = c_lo; c <= c_hi; ++c) {
            const double d2 = (r - row) * (r - row) + (c - col) * (c - col);
            img.at(r, c) += amplitude * std::exp(-d2 * inv);
        }
}

} // namespace

PointSpreadFunction synth_diffuser_psf(const Shape& shape, int blob_count, double blob_sigma,
                                       std::uint64_t seed) {
    if (blob_count < 1 || blob_sigma <= 0.0)
        throw ValueError("synth_diffuser_psf: need at least one blob with positive sigma");
    Image img(shape.rows, shape.cols, 1, 0.0);
    std::mt19937_64 rng(seed);
    // Keep blobs away from the border so the support metadata stays honest.
    const double margin = 2.0 * blob_sigma;
    std::uniform_real_distribution<double> row_dist(margin, shape.rows - 1 - margin);
    std::uniform_real_distribution<double> col_dist(margin, shape.cols - 1 - margin);
    std::uniform_real_distribution<double> amp_dist(0.4, 1.0);
    for (int i = 0; i < blob_count; ++i) {
        const double r = row_dist(rng);
        const double c = col_dist(rng);
        splat_gaussian(img, r, c, blob_sigma, amp_dist(rng));
    }
    return make_psf(std::move(img), "diffuser");
}

PointSpreadFunction synth_lenslet_psf(const Shape& shape, int impulse_count, double impulse_sigma,
                                      std::uint64_t seed) {
    if (impulse_count < 1 || impulse_sigma <= 0.0)
        throw ValueError("synth_lenslet_psf: need at least one impulse with positive sigma");
    Image img(shape.rows, shape.cols, 1, 0.0);
    std::mt19937_64 rng(seed);
    const double margin = std::max(1.0, 2.0 * impulse_sigma);
    std::uniform_real_distribution<double> row_dist(margin, shape.rows - 1 - margin);
    std::uniform_real_distribution<double> col_dist(margin, shape.cols - 1 - margin);
    for (int i = 0; i < impulse_count; ++i) {
        const double r = row_dist(rng);
        const double c = col_dist(rng);
        splat_gaussian(img, r, c, impulse_sigma, 1.0);
    }
    return make_psf(std::move(img), "lenslet");
}

PointSpreadFunction delta_psf(const Shape& shape) {
    Image img(shape.rows, shape.cols, 1, 0.0);
    img.at(shape.rows / 2, shape.cols / 2) = 1.0;
    return make_psf(std::move(img), "delta");
}

std::string to_string(PsfNormalization n) {
    switch (n) {
        case PsfNormalization::unit_sum: return "unit_sum";
        case PsfNormalization::unit_energy: return "unit_energy";
        case PsfNormalization::raw: return "raw";
    }
    return "raw";
}

PsfNormalization psf_normalization_from_string(const std::string& s) {
    if (s == "unit_sum") return PsfNormalization::unit_sum;
    if (s == "unit_energy") return PsfNormalization::unit_energy;
    if (s == "raw") return PsfNormalization::raw;
    throw ValueError("unknown PSF normalization: " + s);
}

} // namespace parlens
