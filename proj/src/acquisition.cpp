#include "parlens/acquisition.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "parlens/convolve.hpp"
#include "parlens/image_io.hpp"

namespace parlens {

namespace fs = std::filesystem;
using nlohmann::json;

std::string camera_kind_name(CameraKind kind) {
    return kind == CameraKind::lensless ? "lensless" : "lensed";
}

CameraKind camera_kind_from_name(const std::string& name) {
    if (name == "lensless") return CameraKind::lensless;
    if (name == "lensed") return CameraKind::lensed;
    throw ConfigError("unknown camera kind '" + name + "' (expected lensless or lensed)");
}

void VirtualCamera::validate() const {
    if (camera_id.empty()) throw ConfigError("camera: empty camera id");
    if (!(exposure_scale > 0.0)) throw ConfigError("camera " + camera_id + ": exposure scale must be positive");
    sensor.validate();
    if (kind == CameraKind::lensless) {
        if (psf_ref.empty())
            throw ConfigError("camera " + camera_id + ": lensless camera needs a PSF reference");
    } else {
        distortion.validate();
        if (std::abs(extrinsics.determinant()) < 1e-12)
            throw ConfigError("camera " + camera_id + ": singular extrinsics");
    }
}

json VirtualCamera::to_json() const {
    json j{{"camera_id", camera_id},
           {"kind", camera_kind_name(kind)},
           {"sensor", sensor.to_json()},
           {"exposure_scale", exposure_scale}};
    if (kind == CameraKind::lensless) {
        j["psf"] = psf_ref;
        j["sensor_window_shape"] = {sensor_window_shape.rows, sensor_window_shape.cols};
    } else {
        j["extrinsics"] = extrinsics.to_json();
        j["distortion"] = distortion.to_json();
    }
    return j;
}

VirtualCamera VirtualCamera::from_json(const json& j) {
    VirtualCamera c;
    try {
        c.camera_id = j.at("camera_id").get<std::string>();
        c.kind = camera_kind_from_name(j.at("kind").get<std::string>());
        if (j.contains("sensor")) c.sensor = SensorModel::from_json(j.at("sensor"));
        c.exposure_scale = j.value("exposure_scale", 1.0);
        if (c.kind == CameraKind::lensless) {
            c.psf_ref = j.at("psf").get<std::string>();
            if (j.contains("sensor_window_shape")) {
                const auto& s = j.at("sensor_window_shape");
                c.sensor_window_shape = {s.at(0).get<int>(), s.at(1).get<int>()};
            }
        } else {
            if (j.contains("extrinsics")) c.extrinsics = Homography::from_json(j.at("extrinsics"));
            c.distortion = DistortionModel::from_json(j.at("distortion"));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("camera: ") + e.what());
    }
    c.validate();
    return c;
}

json ManifestRecord::to_json() const {
    json j{{"image_id", image_id},
           {"camera_id", camera_id},
           {"file", file},
           {"trigger_time_ms", trigger_time_ms},
           {"exposure_scale", exposure_scale},
           {"saturated_fraction", saturated_fraction},
           {"seed", seed}};
    if (!reconstruction.empty()) j["reconstruction"] = reconstruction;
    if (!registered.empty()) j["registered"] = registered;
    if (psnr_db.has_value()) j["psnr_db"] = *psnr_db;
    return j;
}

ManifestRecord ManifestRecord::from_json(const json& j) {
    ManifestRecord r;
    try {
        r.image_id = j.at("image_id").get<std::string>();
        r.camera_id = j.at("camera_id").get<std::string>();
        r.file = j.at("file").get<std::string>();
        r.trigger_time_ms = j.at("trigger_time_ms").get<std::int64_t>();
        r.exposure_scale = j.at("exposure_scale").get<double>();
        r.saturated_fraction = j.at("saturated_fraction").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.reconstruction = j.value("reconstruction", "");
        r.registered = j.value("registered", "");
        if (j.contains("psnr_db")) r.psnr_db = j.at("psnr_db").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest record: ") + e.what());
    }
    return r;
}

const VirtualCamera& DatasetManifest::camera(const std::string& camera_id) const {
    for (const auto& c : cameras)
        if (c.camera_id == camera_id) return c;
    throw ConfigError("manifest: unknown camera '" + camera_id + "'");
}

std::string DatasetManifest::resolve(const std::string& relative_path) const {
    if (root_dir.empty()) return relative_path;
    return (fs::path(root_dir) / relative_path).string();
}

void DatasetManifest::validate() const {
    if (format_version != kFormatVersion)
        throw ConfigError("manifest: unsupported format version " +
                          std::to_string(format_version));
    schedule.validate();
    for (const auto& c : cameras) c.validate();

    const std::size_t expected =
        schedule.image_ids.size() * schedule.camera_order.size();
    if (records.size() != expected)
        throw ConfigError("manifest: expected " + std::to_string(expected) +
                          " records, found " + std::to_string(records.size()));

    std::set<std::pair<std::string, std::string>> pairs;
    std::int64_t previous_time = -1;
    for (const auto& r : records) {
        if (!pairs.insert({r.image_id, r.camera_id}).second)
            throw ConfigError("manifest: duplicate record for image '" + r.image_id +
                              "', camera '" + r.camera_id + "'");
        if (r.trigger_time_ms <= previous_time)
            throw ConfigError("manifest: trigger times not strictly increasing at image '" +
                              r.image_id + "', camera '" + r.camera_id + "'");
        previous_time = r.trigger_time_ms;
        camera(r.camera_id);  // must exist
        if (std::find(schedule.image_ids.begin(), schedule.image_ids.end(), r.image_id) ==
            schedule.image_ids.end())
            throw ConfigError("manifest: record references unscheduled image '" + r.image_id + "'");
    }
}

json DatasetManifest::to_json() const {
    json cams = json::array();
    for (const auto& c : cameras) cams.push_back(c.to_json());
    json recs = json::array();
    for (const auto& r : records) recs.push_back(r.to_json());
    json windows = json::object();
    for (const auto& [id, w] : sensor_windows)
        windows[id] = {{"row0", w.row0}, {"col0", w.col0}, {"rows", w.rows}, {"cols", w.cols}};
    json homs = json::object();
    for (const auto& [id, h] : homographies) homs[id] = h;

    return {{"format_version", format_version},
            {"run_id", run_id},
            {"display_mode", display_mode},
            {"display_shape", {display_shape.rows, display_shape.cols}},
            {"schedule", schedule.to_json()},
            {"cameras", cams},
            {"records", recs},
            {"calibration",
             {{"psf_files", psf_files}, {"sensor_windows", windows}, {"homographies", homs}}},
            {"complete", complete}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
    DatasetManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        m.run_id = j.at("run_id").get<std::string>();
        m.display_mode = j.value("display_mode", "per-camera");
        const auto& ds = j.at("display_shape");
        m.display_shape = {ds.at(0).get<int>(), ds.at(1).get<int>()};
        m.schedule = AcquisitionSchedule::from_json(j.at("schedule"));
        for (const auto& c : j.at("cameras")) m.cameras.push_back(VirtualCamera::from_json(c));
        for (const auto& r : j.at("records")) m.records.push_back(ManifestRecord::from_json(r));
        if (j.contains("calibration")) {
            const auto& cal = j.at("calibration");
            if (cal.contains("psf_files"))
                m.psf_files = cal.at("psf_files").get<std::map<std::string, std::string>>();
            if (cal.contains("sensor_windows"))
                for (const auto& [id, w] : cal.at("sensor_windows").items())
                    m.sensor_windows[id] = PixelGrid{w.at("row0").get<int>(), w.at("col0").get<int>(),
                                                     w.at("rows").get<int>(), w.at("cols").get<int>()};
            if (cal.contains("homographies"))
                for (const auto& [id, h] : cal.at("homographies").items())
                    m.homographies[id] = h;
        }
        m.complete = j.value("complete", true);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw CorruptFileError(path + ": " + e.what());
    }
    DatasetManifest m = from_json(j);
    m.root_dir = fs::path(path).parent_path().string();
    return m;
}

Image render_ideal_frame(const Image& display, const VirtualCamera& camera,
                         const std::map<std::string, PointSpreadFunction>& psf_store,
                         PixelGrid* sensor_window_out) {
    camera.validate();
    if (display.empty()) throw ValueError("render_ideal_frame: empty display image");

    if (camera.kind == CameraKind::lensless) {
        const auto it = psf_store.find(camera.psf_ref);
        if (it == psf_store.end())
            throw ConfigError("camera " + camera.camera_id + ": PSF '" + camera.psf_ref +
                              "' not found in store");
        const PointSpreadFunction& psf = it->second;
        const Shape extent = full_extent(display.shape(), psf.image.shape());
        Shape window_shape = camera.sensor_window_shape;
        if (window_shape.rows <= 0 || window_shape.cols <= 0) window_shape = display.shape();
        const PixelGrid window = centered_window(extent, window_shape);
        if (sensor_window_out) *sensor_window_out = window;
        return forward(display, psf, window);
    }

    // Lensed path: display plane -> camera plane -> lens distortion, at the
    // display's own resolution.
    Image view = warp(display, camera.extrinsics, display.shape());
    return distort_image(view, camera.distortion);
}

double calibrate_exposure(const Image& reference, const VirtualCamera& camera,
                          const std::map<std::string, PointSpreadFunction>& psf_store,
                          double target_fraction) {
    if (!(target_fraction > 0.0 && target_fraction < 1.0))
        throw ValueError("calibrate_exposure: target fraction must be in (0, 1)");
    const Image ideal = render_ideal_frame(reference, camera, psf_store);
    const double p = percentile(ideal, 0.999);
    if (!(p > 0.0))
        throw ValueError("calibrate_exposure: reference measurement is all zero");
    return target_fraction * camera.sensor.full_well_fraction / p;
}

namespace {

// Center crop of the source image onto the display panel.
Image display_crop(const Image& source, const Shape& display_shape,
                   const std::string& image_id) {
    if (source.height() < display_shape.rows || source.width() < display_shape.cols)
        throw ValueError("image '" + image_id + "' is smaller than the display crop");
    return crop(source, centered_window(source.shape(), display_shape));
}

std::string measurement_stem(const std::string& image_id, const std::string& camera_id) {
    return image_id + "__" + camera_id;
}

} // namespace

DatasetManifest run_acquisition(const std::map<std::string, Image>& images,
                                const std::vector<VirtualCamera>& cameras,
                                const AcquisitionSchedule& schedule,
                                const std::map<std::string, PointSpreadFunction>& psf_store,
                                std::uint64_t seed, const std::string& output_dir,
                                const AcquisitionOptions& options) {
    schedule.validate();
    for (const auto& c : cameras) c.validate();

    // The schedule's camera order must cover exactly the supplied cameras.
    std::map<std::string, const VirtualCamera*> by_id;
    for (const auto& c : cameras) {
        if (!by_id.emplace(c.camera_id, &c).second)
            throw ConfigError("duplicate camera id '" + c.camera_id + "'");
    }
    for (const auto& id : schedule.camera_order)
        if (by_id.find(id) == by_id.end())
            throw ConfigError("schedule references unknown camera '" + id + "'");
    if (schedule.camera_order.size() != cameras.size())
        throw ConfigError("schedule camera order does not cover all cameras");

    // Pre-crop every displayed image; missing ids fail before any write.
    std::map<std::string, Image> displays;
    for (const auto& id : schedule.image_ids) {
        const auto it = images.find(id);
        if (it == images.end())
            throw ConfigError("schedule references missing image '" + id + "'");
        displays.emplace(id, display_crop(it->second, options.display_shape, id));
    }

    fs::create_directories(fs::path(output_dir) / "measurements");
    fs::create_directories(fs::path(output_dir) / "psfs");

    DatasetManifest manifest;
    manifest.run_id = options.run_id;
    manifest.display_mode = display_mode_name(options.mode);
    manifest.display_shape = options.display_shape;
    manifest.schedule = schedule;
    manifest.cameras = cameras;
    manifest.root_dir = output_dir;

    for (const auto& c : cameras) {
        if (c.kind != CameraKind::lensless) continue;
        if (manifest.psf_files.count(c.psf_ref)) continue;
        const auto it = psf_store.find(c.psf_ref);
        if (it == psf_store.end())
            throw ConfigError("camera " + c.camera_id + ": PSF '" + c.psf_ref +
                              "' not found in store");
        const std::string rel = "psfs/" + c.psf_ref + ".pfm";
        save_psf(it->second, (fs::path(output_dir) / rel).string());
        manifest.psf_files[c.psf_ref] = rel;
    }

    const std::vector<TriggerEvent> events = build_trigger_list(schedule, options.mode);
    try {
        for (const auto& event : events) {
            const VirtualCamera& camera = *by_id.at(event.camera_id);
            const Image& display = displays.at(event.image_id);

            PixelGrid window{};
            const Image ideal = render_ideal_frame(display, camera, psf_store, &window);
            if (camera.kind == CameraKind::lensless)
                manifest.sensor_windows[camera.camera_id] = window;

            const std::uint64_t rec_seed = record_seed(seed, event.image_id, event.camera_id);
            Measurement m = sense(ideal, camera.sensor, camera.exposure_scale, rec_seed);
            m.camera_id = event.camera_id;
            m.source_image_id = event.image_id;
            m.trigger_time_ms = event.trigger_time_ms;

            const std::string stem = measurement_stem(event.image_id, event.camera_id);
            const std::string rel = "measurements/" + stem + ".pfm";
            save_image(m.image, (fs::path(output_dir) / rel).string(), ImageFileFormat::pfm);

            // Preview normalized by the full well so the PNG range is fixed.
            Image preview = m.image;
            preview *= 1.0 / camera.sensor.full_well_fraction;
            save_image(preview, (fs::path(output_dir) / "measurements" / (stem + ".png")).string(),
                       ImageFileFormat::png16);

            ManifestRecord record;
            record.image_id = event.image_id;
            record.camera_id = event.camera_id;
            record.file = rel;
            record.trigger_time_ms = event.trigger_time_ms;
            record.exposure_scale = camera.exposure_scale;
            record.saturated_fraction = m.saturated_fraction;
            record.seed = rec_seed;
            manifest.records.push_back(std::move(record));
        }
    } catch (...) {
        // Leave a journal of what completed, flagged as partial.
        manifest.complete = false;
        try {
            manifest.save((fs::path(output_dir) / "manifest.json").string());
        } catch (...) {
        }
        throw;
    }

    manifest.validate();
    manifest.save((fs::path(output_dir) / "manifest.json").string());
    return manifest;
}

} // namespace parlens
