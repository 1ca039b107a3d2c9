#include "parlens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "parlens/circles_grid.hpp"
#include "parlens/image_io.hpp"
#include "parlens/photometric.hpp"

namespace parlens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& base, const std::string& rel) {
    if (base.empty() || fs::path(rel).is_absolute()) return rel;
    return (fs::path(base) / rel).string();
}

bool loadable_image(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".png" || ext == ".pfm" || ext == ".PNG" || ext == ".PFM";
}

} // namespace

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
    RunConfig c;
    try {
        c.input_dir = join(base_dir, j.at("input_dir").get<std::string>());
        c.output_dir = join(base_dir, j.at("output_dir").get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.mode = display_mode_from_name(j.value("mode", std::string("per-camera")));
        if (j.contains("display_shape")) {
            const auto& s = j.at("display_shape");
            c.display_shape = {s.at(0).get<int>(), s.at(1).get<int>()};
        }
        c.exposure_target_fraction = j.value("exposure_target_fraction", c.exposure_target_fraction);
        c.include_calibration_target =
            j.value("include_calibration_target", c.include_calibration_target);
        c.run_id = j.value("run_id", c.run_id);
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            c.inter_camera_delay_ms = s.value("inter_camera_delay_ms", c.inter_camera_delay_ms);
            c.inter_image_delay_ms = s.value("inter_image_delay_ms", c.inter_image_delay_ms);
        }
        if (j.contains("solver")) c.solver = SolverConfig::from_json(j.at("solver"));

        SensorModel default_sensor;
        if (j.contains("sensor")) default_sensor = SensorModel::from_json(j.at("sensor"));

        if (!j.contains("cameras") || !j.at("cameras").is_array() || j.at("cameras").empty())
            throw ConfigError("config: cameras array missing or empty");
        for (const auto& cj : j.at("cameras")) {
            CameraEntry entry;
            json cam = cj;
            if (!cam.contains("sensor")) cam["sensor"] = default_sensor.to_json();
            // The camera-level "psf" field is a file path in the config; the
            // in-run reference is the camera id.
            const std::string kind = cam.value("kind", std::string("lensless"));
            if (kind == "lensless") {
                entry.psf_path = join(base_dir, cam.value("psf", std::string()));
                cam["psf"] = cam.at("camera_id");
                if (!cam.contains("exposure_scale")) cam["exposure_scale"] = 1.0;
            } else if (!cam.contains("exposure_scale")) {
                cam["exposure_scale"] = 0.5;  // 50/50 beamsplitter on the lensed path
            }
            entry.camera = VirtualCamera::from_json(cam);
            entry.camera.sensor_window_shape = c.display_shape;
            c.cameras.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw CorruptFileError(path + ": " + e.what());
    }
    RunConfig c = from_json(j, fs::path(path).parent_path().string());
    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (!fs::is_directory(input_dir))
        throw ConfigError("config: input_dir '" + input_dir + "' is not a directory");
    if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
    if (display_shape.rows < 8 || display_shape.cols < 8)
        throw ConfigError("config: display shape too small");
    if (!(exposure_target_fraction > 0.0 && exposure_target_fraction < 1.0))
        throw ConfigError("config: exposure_target_fraction must be in (0, 1)");
    if (cameras.empty()) throw ConfigError("config: no cameras");
    solver.validate();

    std::set<std::string> ids;
    for (const auto& entry : cameras) {
        entry.camera.validate();
        if (!ids.insert(entry.camera.camera_id).second)
            throw ConfigError("config: duplicate camera id '" + entry.camera.camera_id + "'");
        if (entry.camera.kind == CameraKind::lensless) {
            if (entry.psf_path.empty())
                throw ConfigError("config: camera '" + entry.camera.camera_id +
                                  "' has no psf path");
            if (!fs::exists(entry.psf_path))
                throw ConfigError("config: PSF file '" + entry.psf_path + "' does not exist");
        }
    }
}

Image make_calibration_target(const Shape& display_shape) {
    CirclesGridSpec spec;  // 4x11 asymmetric
    // World extent: x spans (2*(cols-1)+1)/2 spacings, y spans (rows-1)/2.
    const double x_extent = (2.0 * (spec.cols - 1) + 1.0) / 2.0 * spec.diagonal_spacing;
    const double y_extent = (spec.rows - 1) / 2.0 * spec.diagonal_spacing;

    GridRenderOptions options;
    options.pixels_per_unit = 0.84 * display_shape.cols / x_extent;
    options.origin_px = {(display_shape.cols - 1 - x_extent * options.pixels_per_unit) / 2.0,
                         (display_shape.rows - 1 - y_extent * options.pixels_per_unit) / 2.0};
    options.circle_radius_px = 0.22 * options.pixels_per_unit;
    return render_circles_grid(spec, display_shape, options);
}

std::string simulate_run(const RunConfig& config) {
    config.validate();

    // Display images, ordered by filename for a stable schedule.
    std::vector<fs::path> files;
    for (const auto& it : fs::directory_iterator(config.input_dir))
        if (it.is_regular_file() && loadable_image(it.path())) files.push_back(it.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ConfigError("config: input_dir '" + config.input_dir + "' has no PNG/PFM images");

    std::map<std::string, Image> images;
    std::vector<std::string> image_ids;
    for (const auto& f : files) {
        const std::string id = f.stem().string();
        if (id == kCalTargetImageId)
            throw ConfigError("config: image id '" + std::string(kCalTargetImageId) +
                              "' is reserved for the calibration target");
        if (!images.emplace(id, load_image(f.string())).second)
            throw ConfigError("config: duplicate image id '" + id + "'");
        image_ids.push_back(id);
    }

    if (config.include_calibration_target) {
        images.emplace(kCalTargetImageId, make_calibration_target(config.display_shape));
        image_ids.insert(image_ids.begin(), kCalTargetImageId);
    }

    std::map<std::string, PointSpreadFunction> psf_store;
    std::vector<VirtualCamera> cameras;
    AcquisitionSchedule schedule;
    schedule.inter_camera_delay_ms = config.inter_camera_delay_ms;
    schedule.inter_image_delay_ms = config.inter_image_delay_ms;
    schedule.image_ids = image_ids;
    for (const auto& entry : config.cameras) {
        VirtualCamera camera = entry.camera;
        if (camera.kind == CameraKind::lensless) {
            PointSpreadFunction psf = load_psf(entry.psf_path);
            psf.normalize(PsfNormalization::unit_sum);
            psf.label = camera.psf_ref;
            psf_store.emplace(camera.psf_ref, std::move(psf));
        }
        cameras.push_back(std::move(camera));
        schedule.camera_order.push_back(entry.camera.camera_id);
    }

    // Exposure calibration against a stable reference display: the
    // calibration target when present, else the first image. The configured
    // exposure_scale survives as a relative gain (the lensed path's 0.5
    // models its beamsplitter loss, which calibration must not undo).
    const Image reference =
        crop(images.at(image_ids.front()),
             centered_window(images.at(image_ids.front()).shape(), config.display_shape));
    for (auto& camera : cameras) {
        const double calibrated =
            calibrate_exposure(reference, camera, psf_store, config.exposure_target_fraction);
        camera.exposure_scale *= calibrated;
    }

    AcquisitionOptions options;
    options.display_shape = config.display_shape;
    options.mode = config.mode;
    options.run_id = config.run_id;
    run_acquisition(images, cameras, schedule, psf_store, config.seed, config.output_dir,
                    options);
    return (fs::path(config.output_dir) / "manifest.json").string();
}

namespace {

std::string record_stem(const ManifestRecord& r) {
    return r.image_id + "__" + r.camera_id;
}

// Deterministic [0,1] preview scaling by the image's own bright end.
void save_preview(const Image& img, const std::string& path) {
    Image preview = img;
    const double p = percentile(img, 0.999);
    if (p > 0.0) preview *= 1.0 / p;
    for (double& v : preview.data()) v = std::clamp(v, 0.0, 1.0);
    save_image(preview, path, ImageFileFormat::png16);
}

Measurement load_measurement(const DatasetManifest& manifest, const ManifestRecord& record) {
    Measurement m;
    m.image = load_image(manifest.resolve(record.file));
    m.camera_id = record.camera_id;
    m.exposure_scale = record.exposure_scale;
    m.saturated_fraction = record.saturated_fraction;
    m.trigger_time_ms = record.trigger_time_ms;
    m.source_image_id = record.image_id;
    return m;
}

} // namespace

void reconstruct_manifest(const std::string& manifest_path, const SolverConfig& solver) {
    solver.validate();
    DatasetManifest manifest = DatasetManifest::load(manifest_path);
    manifest.validate();

    std::map<std::string, PointSpreadFunction> psfs;
    for (const auto& [label, rel] : manifest.psf_files)
        psfs.emplace(label, load_psf(manifest.resolve(rel)));

    fs::create_directories(fs::path(manifest.root_dir) / "reconstructions");

    for (auto& record : manifest.records) {
        const VirtualCamera& camera = manifest.camera(record.camera_id);
        if (camera.kind != CameraKind::lensless) continue;

        const auto window_it = manifest.sensor_windows.find(record.camera_id);
        if (window_it == manifest.sensor_windows.end())
            throw ConfigError("manifest: no sensor window recorded for camera '" +
                              record.camera_id + "'");

        const Measurement m = load_measurement(manifest, record);
        const SolverResult result =
            fista(m, psfs.at(camera.psf_ref), solver, manifest.display_shape, &window_it->second);

        const std::string stem = record_stem(record);
        const std::string rel = "reconstructions/" + stem + ".pfm";
        save_image(result.estimate, manifest.resolve(rel), ImageFileFormat::pfm);
        save_preview(result.estimate,
                     manifest.resolve("reconstructions/" + stem + ".png"));
        write_objective_csv(manifest.resolve("reconstructions/" + stem + "_objective.csv"),
                            result.objective_history);
        record.reconstruction = rel;
    }

    manifest.save(manifest_path);
}

namespace {

// Measurements carry the exposure scale; dividing it out returns both
// pipeline branches to display units so they can be compared directly.
Image to_display_units(const Image& img, double exposure_scale) {
    Image out = img;
    out *= 1.0 / exposure_scale;
    return out;
}

Image clamp01(const Image& img) {
    Image out = img;
    for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

} // namespace

void register_manifest(const std::string& manifest_path) {
    DatasetManifest manifest = DatasetManifest::load(manifest_path);
    manifest.validate();

    if (std::find(manifest.schedule.image_ids.begin(), manifest.schedule.image_ids.end(),
                  kCalTargetImageId) == manifest.schedule.image_ids.end())
        throw ConfigError("register: manifest has no '" + std::string(kCalTargetImageId) +
                          "' image; simulate with the calibration target enabled");

    const VirtualCamera* lensed = nullptr;
    for (const auto& c : manifest.cameras)
        if (c.kind == CameraKind::lensed) {
            if (lensed) throw ConfigError("register: multiple lensed cameras");
            lensed = &c;
        }
    if (!lensed) throw ConfigError("register: manifest has no lensed camera");

    // Index records by (image, camera).
    std::map<std::pair<std::string, std::string>, ManifestRecord*> index;
    for (auto& r : manifest.records) index[{r.image_id, r.camera_id}] = &r;

    auto ground_truth_view = [&](const std::string& image_id) {
        const auto it = index.find({image_id, lensed->camera_id});
        if (it == index.end())
            throw ConfigError("register: no ground-truth record for image '" + image_id + "'");
        const ManifestRecord& record = *it->second;
        const Image raw = load_image(manifest.resolve(record.file));
        return to_display_units(undistort_image(raw, lensed->distortion),
                                record.exposure_scale);
    };

    const Image fixed_target = ground_truth_view(kCalTargetImageId);
    const CirclesGridSpec grid_spec;  // simulate renders the default 4x11 target
    const std::vector<Point2> fixed_points = detect_grid(fixed_target, grid_spec);

    fs::create_directories(fs::path(manifest.root_dir) / "registered");

    for (const auto& camera : manifest.cameras) {
        if (camera.kind != CameraKind::lensless) continue;

        const auto cal_it = index.find({kCalTargetImageId, camera.camera_id});
        if (cal_it == index.end() || cal_it->second->reconstruction.empty())
            throw ConfigError("register: camera '" + camera.camera_id +
                              "' has no calibration-target reconstruction; run reconstruct first");

        const Image moving_target =
            to_display_units(load_image(manifest.resolve(cal_it->second->reconstruction)),
                             cal_it->second->exposure_scale);
        const std::vector<Point2> moving_points = detect_grid(moving_target, grid_spec);

        const Homography coarse = estimate_homography_dlt(moving_points, fixed_points);
        const PhotometricResult fine =
            refine_homography_photometric(moving_target, fixed_target, coarse, 30);

        json reg{{"homography", fine.h.to_json()},
                 {"initial_residual", fine.initial_residual},
                 {"final_residual", fine.final_residual},
                 {"iterations", fine.iterations}};
        manifest.homographies[camera.camera_id] = reg;

        for (auto& record : manifest.records) {
            if (record.camera_id != camera.camera_id) continue;
            if (record.reconstruction.empty())
                throw ConfigError("register: record '" + record.image_id + "'/'" +
                                  record.camera_id +
                                  "' has no reconstruction; run reconstruct first");

            const Image recon = to_display_units(
                load_image(manifest.resolve(record.reconstruction)), record.exposure_scale);
            const Image aligned = warp(recon, fine.h, fixed_target.shape());

            const std::string rel = "registered/" + record_stem(record) + ".pfm";
            save_image(aligned, manifest.resolve(rel), ImageFileFormat::pfm);
            record.registered = rel;

            // Interior fidelity against the matching ground-truth view.
            const Image gt = ground_truth_view(record.image_id);
            const Shape interior{fixed_target.height() - 2 * kRegistrationFidelityMargin,
                                 fixed_target.width() - 2 * kRegistrationFidelityMargin};
            if (interior.rows < 1 || interior.cols < 1)
                throw ConfigError("register: display too small for the fidelity margin");
            const PixelGrid window = centered_window(fixed_target.shape(), interior);
            const FidelityReport report =
                fidelity(clamp01(crop(aligned, window)), clamp01(crop(gt, window)));
            record.psnr_db = report.psnr_db;
        }
    }

    manifest.save(manifest_path);
}

json analyze_psfs(const std::vector<std::string>& psf_paths, const std::string& output_dir) {
    if (psf_paths.empty()) throw ValueError("analyze: no PSF files given");
    fs::create_directories(output_dir);

    std::vector<PointSpreadFunction> psfs;
    for (const auto& path : psf_paths) psfs.push_back(load_psf(path));

    json report;
    report["psfs"] = json::array();
    std::set<std::string> used_stems;
    std::vector<AutocorrelationProfile> profiles;
    for (std::size_t i = 0; i < psfs.size(); ++i) {
        std::string stem = fs::path(psf_paths[i]).stem().string();
        while (!used_stems.insert(stem).second) stem += "_dup";

        const Image ac = autocorrelate(psfs[i]);
        const AutocorrelationProfile profile = radial_profile(ac, 1.0);
        profiles.push_back(profile);

        const std::string csv = (fs::path(output_dir) / (stem + "_autocorr.csv")).string();
        write_profile_csv(csv, profile);

        json entry = profile.to_json();
        entry["label"] = psfs[i].label;
        entry["source"] = psf_paths[i];
        entry["profile_csv"] = csv;
        report["psfs"].push_back(std::move(entry));
    }

    if (psfs.size() == 2) {
        const ImagerComparison cmp = compare_imagers(psfs[0], psfs[1]);
        const std::string csv = (fs::path(output_dir) / "comparison.csv").string();
        write_comparison_csv(csv, cmp);
        report["comparison"] = cmp.to_json();
        report["comparison"]["csv"] = csv;
    }

    std::ofstream out((fs::path(output_dir) / "psf_analysis.json").string());
    if (!out) throw IoError("analyze: cannot write psf_analysis.json");
    out << report.dump(2) << '\n';
    return report;
}

} // namespace parlens
