// Python bindings for the main pipeline operations. Images cross the
// boundary as float64 numpy arrays shaped (rows, cols) or (rows, cols, ch).

#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "parlens/convolve.hpp"
#include "parlens/distortion.hpp"
#include "parlens/fista.hpp"
#include "parlens/homography.hpp"
#include "parlens/image_io.hpp"
#include "parlens/metrology.hpp"
#include "parlens/package.hpp"
#include "parlens/pipeline.hpp"
#include "parlens/psf.hpp"

namespace py = pybind11;

namespace {

parlens::Image image_from_array(const py::array& array) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(array);
    if (!a) throw parlens::ValueError("expected a numeric array");
    if (a.ndim() != 2 && a.ndim() != 3)
        throw parlens::ShapeError("expected a (rows, cols) or (rows, cols, channels) array");
    const int rows = static_cast<int>(a.shape(0));
    const int cols = static_cast<int>(a.shape(1));
    const int channels = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    parlens::Image img(rows, cols, channels);
    std::memcpy(img.data().data(), a.data(), sizeof(double) * img.sample_count());
    return img;
}

py::array array_from_image(const parlens::Image& img) {
    py::array_t<double> out;
    if (img.channels() == 1)
        out = py::array_t<double>({img.height(), img.width()});
    else
        out = py::array_t<double>({img.height(), img.width(), img.channels()});
    std::memcpy(out.mutable_data(), img.data().data(), sizeof(double) * img.sample_count());
    return out;
}

parlens::PointSpreadFunction psf_from_array(const py::array& array) {
    // Keep the caller's scaling: operators must see exactly the given kernel.
    return parlens::make_psf(image_from_array(array), "psf", parlens::PsfNormalization::raw);
}

parlens::Homography homography_from_array(const py::array& array) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(array);
    if (!a || a.ndim() != 2 || a.shape(0) != 3 || a.shape(1) != 3)
        throw parlens::ShapeError("homography must be a 3x3 array");
    parlens::Homography h;
    std::memcpy(h.m.data(), a.data(), sizeof(double) * 9);
    return h;
}

py::array array_from_homography(const parlens::Homography& h) {
    py::array_t<double> out({3, 3});
    std::memcpy(out.mutable_data(), h.m.data(), sizeof(double) * 9);
    return out;
}

std::vector<parlens::Point2> points_from_array(const py::array& array) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(array);
    if (!a || a.ndim() != 2 || a.shape(1) != 2)
        throw parlens::ShapeError("expected an (N, 2) point array");
    std::vector<parlens::Point2> pts(static_cast<std::size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        pts[static_cast<std::size_t>(i)] = {a.at(i, 0), a.at(i, 1)};
    return pts;
}

py::array array_from_points(const std::vector<parlens::Point2>& pts) {
    py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t(2)});
    for (std::size_t i = 0; i < pts.size(); ++i) {
        out.mutable_at(static_cast<py::ssize_t>(i), 0) = pts[i].x;
        out.mutable_at(static_cast<py::ssize_t>(i), 1) = pts[i].y;
    }
    return out;
}

parlens::DistortionModel model_from_kwargs(double fx, double fy, double cx, double cy, double k1,
                                           double k2, double k3, double p1, double p2) {
    parlens::DistortionModel model;
    model.fx = fx;
    model.fy = fy;
    model.cx = cx;
    model.cy = cy;
    model.k1 = k1;
    model.k2 = k2;
    model.k3 = k3;
    model.p1 = p1;
    model.p2 = p2;
    model.validate();
    return model;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Parallel lensless-imaging dataset pipeline (C++ core)";

    py::register_exception<parlens::Error>(m, "PipelineError");

    // --- image I/O -------------------------------------------------------
    m.def(
        "load_image", [](const std::string& path) { return array_from_image(parlens::load_image(path)); },
        py::arg("path"), "Load a PNG or PFM image as a float64 array in [0, 1] display units.");
    m.def(
        "save_image",
        [](const py::array& image, const std::string& path, const std::string& format) {
            parlens::ImageFileFormat fmt;
            if (format == "pfm")
                fmt = parlens::ImageFileFormat::pfm;
            else if (format == "png8")
                fmt = parlens::ImageFileFormat::png8;
            else if (format == "png16")
                fmt = parlens::ImageFileFormat::png16;
            else
                throw parlens::ValueError("unknown image format '" + format + "'");
            parlens::save_image(image_from_array(image), path, fmt);
        },
        py::arg("image"), py::arg("path"), py::arg("format") = "pfm");

    // --- forward model ---------------------------------------------------
    m.def(
        "convolve",
        [](const py::array& a, const py::array& b) {
            return array_from_image(parlens::convolve_linear(image_from_array(a), psf_from_array(b)));
        },
        py::arg("a"), py::arg("b"),
        "Full linear (zero-padded) convolution of an image with a non-negative kernel.");
    m.def(
        "forward",
        [](const py::array& scene, const py::array& psf, std::pair<int, int> sensor_shape) {
            const parlens::Image s = image_from_array(scene);
            parlens::Shape shape{sensor_shape.first, sensor_shape.second};
            if (shape.rows <= 0) shape = s.shape();
            const parlens::PixelGrid window = parlens::centered_window(
                parlens::full_extent(s.shape(), image_from_array(psf).shape()), shape);
            return array_from_image(parlens::forward(s, psf_from_array(psf), window));
        },
        py::arg("scene"), py::arg("psf"), py::arg("sensor_shape") = std::pair<int, int>{0, 0},
        "Convolve a scene with a PSF and crop the centered sensor window.");
    m.def(
        "reconstruct",
        [](const py::array& measurement, const py::array& psf, std::pair<int, int> scene_shape,
           int iterations, double tolerance) {
            parlens::Measurement meas;
            meas.image = image_from_array(measurement);
            parlens::SolverConfig config;
            config.max_iterations = iterations;
            config.tolerance = tolerance;
            parlens::Shape shape{scene_shape.first, scene_shape.second};
            if (shape.rows <= 0) shape = meas.image.shape();
            const parlens::PointSpreadFunction kernel = psf_from_array(psf);
            const parlens::PixelGrid window = parlens::centered_window(
                parlens::full_extent(shape, kernel.image.shape()), meas.image.shape());
            const parlens::SolverResult result =
                parlens::fista(meas, kernel, config, shape, &window);
            return py::make_tuple(array_from_image(result.estimate), result.objective_history);
        },
        py::arg("measurement"), py::arg("psf"), py::arg("scene_shape") = std::pair<int, int>{0, 0},
        py::arg("iterations") = 200, py::arg("tolerance") = 0.0,
        "FISTA non-negative deconvolution; returns (estimate, objective_history).");

    // --- PSF synthesis and metrology --------------------------------------
    m.def(
        "synth_diffuser_psf",
        [](std::pair<int, int> shape, int blobs, double sigma, std::uint64_t seed) {
            return array_from_image(
                parlens::synth_diffuser_psf({shape.first, shape.second}, blobs, sigma, seed).image);
        },
        py::arg("shape"), py::arg("blobs") = 60, py::arg("sigma") = 1.4, py::arg("seed") = 7);
    m.def(
        "synth_lenslet_psf",
        [](std::pair<int, int> shape, int impulses, double sigma, std::uint64_t seed) {
            return array_from_image(
                parlens::synth_lenslet_psf({shape.first, shape.second}, impulses, sigma, seed)
                    .image);
        },
        py::arg("shape"), py::arg("impulses") = 9, py::arg("sigma") = 0.7, py::arg("seed") = 7);
    m.def(
        "autocorrelate",
        [](const py::array& psf) {
            return array_from_image(parlens::autocorrelate(psf_from_array(psf)));
        },
        py::arg("psf"), "Normalized mean-subtracted autocorrelation map of a PSF.");
    m.def(
        "psf_profile",
        [](const py::array& psf) {
            const parlens::AutocorrelationProfile profile =
                parlens::radial_profile(parlens::autocorrelate(psf_from_array(psf)), 1.0);
            py::dict out;
            out["lags"] = profile.lags;
            out["values"] = profile.values;
            out["fwhm"] = profile.fwhm;
            out["fwhm_defined"] = profile.fwhm_defined;
            out["main_lobe_radius"] = profile.main_lobe_radius;
            out["peak_sidelobe_ratio"] = profile.peak_sidelobe_ratio;
            out["sidelobe_energy_fraction"] = profile.sidelobe_energy_fraction;
            return out;
        },
        py::arg("psf"), "Radial autocorrelation profile with sharpness metrics.");

    // --- geometry ----------------------------------------------------------
    m.def(
        "estimate_homography",
        [](const py::array& src, const py::array& dst) {
            return array_from_homography(
                parlens::estimate_homography_dlt(points_from_array(src), points_from_array(dst)));
        },
        py::arg("src"), py::arg("dst"), "Least-squares homography from (N, 2) correspondences.");
    m.def(
        "warp",
        [](const py::array& image, const py::array& h, std::pair<int, int> out_shape) {
            const parlens::Image img = image_from_array(image);
            parlens::Shape shape{out_shape.first, out_shape.second};
            if (shape.rows <= 0) shape = img.shape();
            return array_from_image(parlens::warp(img, homography_from_array(h), shape));
        },
        py::arg("image"), py::arg("homography"), py::arg("out_shape") = std::pair<int, int>{0, 0},
        "Inverse-map bilinear warp of an image under a homography.");
    m.def(
        "distort_points",
        [](const py::array& normalized, double fx, double fy, double cx, double cy, double k1,
           double k2, double k3, double p1, double p2) {
            const parlens::DistortionModel model =
                model_from_kwargs(fx, fy, cx, cy, k1, k2, k3, p1, p2);
            std::vector<parlens::Point2> out;
            for (const parlens::Point2& p : points_from_array(normalized))
                out.push_back(parlens::distort(p, model));
            return array_from_points(out);
        },
        py::arg("normalized"), py::arg("fx") = 1.0, py::arg("fy") = 1.0, py::arg("cx") = 0.0,
        py::arg("cy") = 0.0, py::arg("k1") = 0.0, py::arg("k2") = 0.0, py::arg("k3") = 0.0,
        py::arg("p1") = 0.0, py::arg("p2") = 0.0,
        "Apply radial-tangential distortion to normalized (N, 2) points; returns pixels.");
    m.def(
        "undistort_points",
        [](const py::array& pixels, double fx, double fy, double cx, double cy, double k1,
           double k2, double k3, double p1, double p2) {
            const parlens::DistortionModel model =
                model_from_kwargs(fx, fy, cx, cy, k1, k2, k3, p1, p2);
            std::vector<parlens::Point2> out;
            for (const parlens::Point2& p : points_from_array(pixels))
                out.push_back(parlens::undistort_point(p, model));
            return array_from_points(out);
        },
        py::arg("pixels"), py::arg("fx") = 1.0, py::arg("fy") = 1.0, py::arg("cx") = 0.0,
        py::arg("cy") = 0.0, py::arg("k1") = 0.0, py::arg("k2") = 0.0, py::arg("k3") = 0.0,
        py::arg("p1") = 0.0, py::arg("p2") = 0.0,
        "Invert the distortion model for (N, 2) pixel points; returns normalized coords.");

    // --- pipeline drivers --------------------------------------------------
    m.def(
        "simulate",
        [](const std::string& config_path, std::int64_t seed, const std::string& output_dir) {
            parlens::RunConfig config = parlens::RunConfig::load(config_path);
            if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
            if (!output_dir.empty()) config.output_dir = output_dir;
            return parlens::simulate_run(config);
        },
        py::arg("config_path"), py::arg("seed") = -1, py::arg("output_dir") = std::string(),
        "Run a full capture from a config file; returns the manifest path.");
    m.def(
        "reconstruct_manifest",
        [](const std::string& manifest_path, int iterations) {
            parlens::SolverConfig solver;
            if (iterations >= 0) solver.max_iterations = iterations;
            parlens::reconstruct_manifest(manifest_path, solver);
        },
        py::arg("manifest_path"), py::arg("iterations") = -1);
    m.def("register_manifest", &parlens::register_manifest, py::arg("manifest_path"));
    m.def(
        "package_dataset",
        [](const std::string& manifest_path, const std::string& output_dir) {
            return parlens::package_dataset(parlens::DatasetManifest::load(manifest_path),
                                            output_dir);
        },
        py::arg("manifest_path"), py::arg("output_dir"));
}
