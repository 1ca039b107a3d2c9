#include "parlens/package.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <vector>

namespace parlens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("manifest schema: " + what);
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct CopyJob {
    std::string src;      // absolute/current location
    std::string dst_rel;  // path inside the package
    bool required = true;
};

} // namespace

void validate_manifest_json(const json& j) {
    require(j.is_object(), "top level must be an object");
    require(j.contains("format_version") && j.at("format_version").is_number_integer(),
            "format_version missing or not an integer");
    require(j.contains("run_id") && j.at("run_id").is_string(), "run_id missing or not a string");
    require(j.contains("display_mode") && j.at("display_mode").is_string(),
            "display_mode missing or not a string");
    require(j.contains("display_shape") && j.at("display_shape").is_array() &&
                j.at("display_shape").size() == 2,
            "display_shape must be a [rows, cols] pair");
    for (const auto& v : j.at("display_shape"))
        require(v.is_number_integer() && v.get<int>() > 0, "display_shape entries must be positive");

    require(j.contains("schedule") && j.at("schedule").is_object(), "schedule missing");
    const auto& schedule = j.at("schedule");
    for (const char* key : {"inter_camera_delay_ms", "inter_image_delay_ms"})
        require(schedule.contains(key) && schedule.at(key).is_number_integer(),
                std::string("schedule.") + key + " missing or not an integer");
    for (const char* key : {"camera_order", "image_ids"})
        require(schedule.contains(key) && schedule.at(key).is_array(),
                std::string("schedule.") + key + " missing or not an array");

    require(j.contains("cameras") && j.at("cameras").is_array() && !j.at("cameras").empty(),
            "cameras missing or empty");
    for (const auto& c : j.at("cameras")) {
        require(c.is_object(), "camera entries must be objects");
        require(c.contains("camera_id") && c.at("camera_id").is_string(),
                "camera.camera_id missing");
        require(c.contains("kind") && c.at("kind").is_string(), "camera.kind missing");
        require(c.contains("exposure_scale") && c.at("exposure_scale").is_number(),
                "camera.exposure_scale missing");
    }

    require(j.contains("records") && j.at("records").is_array(), "records missing");
    for (const auto& r : j.at("records")) {
        require(r.is_object(), "record entries must be objects");
        for (const char* key : {"image_id", "camera_id", "file"})
            require(r.contains(key) && r.at(key).is_string(),
                    std::string("record.") + key + " missing or not a string");
        require(r.contains("trigger_time_ms") && r.at("trigger_time_ms").is_number_integer(),
                "record.trigger_time_ms missing or not an integer");
        for (const char* key : {"exposure_scale", "saturated_fraction"})
            require(r.contains(key) && r.at(key).is_number(),
                    std::string("record.") + key + " missing or not a number");
        require(r.contains("seed") && r.at("seed").is_number(), "record.seed missing");
    }

    require(j.contains("calibration") && j.at("calibration").is_object(), "calibration missing");
    require(j.contains("complete") && j.at("complete").is_boolean(),
            "complete missing or not a boolean");
}

std::string package_dataset(const DatasetManifest& manifest, const std::string& output_dir) {
    manifest.validate();
    validate_manifest_json(manifest.to_json());
    if (!manifest.complete)
        throw ConfigError("package: manifest is flagged incomplete");

    // Plan all copies first so dangling references fail before any write.
    std::vector<CopyJob> jobs;
    DatasetManifest packaged = manifest;

    auto sibling_preview = [](const std::string& pfm_rel) {
        return fs::path(pfm_rel).replace_extension(".png").string();
    };

    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const ManifestRecord& r = manifest.records[i];
        const bool lensless = manifest.camera(r.camera_id).kind == CameraKind::lensless;
        const std::string dir = lensless ? "measurements" : "ground_truth";
        const std::string name = fs::path(r.file).filename().string();
        jobs.push_back({manifest.resolve(r.file), dir + "/" + name, true});
        packaged.records[i].file = dir + "/" + name;

        const std::string preview = sibling_preview(r.file);
        if (fs::exists(manifest.resolve(preview)))
            jobs.push_back({manifest.resolve(preview), dir + "/" + sibling_preview(name), false});

        if (!r.reconstruction.empty()) {
            const std::string rname = fs::path(r.reconstruction).filename().string();
            jobs.push_back({manifest.resolve(r.reconstruction), "reconstructions/" + rname, true});
            packaged.records[i].reconstruction = "reconstructions/" + rname;
            for (const std::string extra :
                 {sibling_preview(r.reconstruction),
                  fs::path(r.reconstruction).replace_extension().string() + "_objective.csv"})
                if (fs::exists(manifest.resolve(extra)))
                    jobs.push_back({manifest.resolve(extra),
                                    "reconstructions/" + fs::path(extra).filename().string(),
                                    false});
        }
        if (!r.registered.empty()) {
            const std::string gname = fs::path(r.registered).filename().string();
            jobs.push_back({manifest.resolve(r.registered), "registered/" + gname, true});
            packaged.records[i].registered = "registered/" + gname;
        }
    }

    for (const auto& [label, rel] : manifest.psf_files) {
        const std::string name = fs::path(rel).filename().string();
        jobs.push_back({manifest.resolve(rel), "psfs/" + name, true});
        jobs.push_back({manifest.resolve(rel + ".json"), "psfs/" + name + ".json", true});
        packaged.psf_files[label] = "psfs/" + name;
    }

    for (const auto& job : jobs)
        if (job.required && !fs::exists(job.src))
            throw IoError("package: missing referenced file: " + job.src);

    for (const char* dir :
         {"measurements", "ground_truth", "reconstructions", "registered", "psfs", "calibration"})
        fs::create_directories(fs::path(output_dir) / dir);

    for (const auto& job : jobs) {
        if (!fs::exists(job.src)) continue;
        fs::copy_file(job.src, fs::path(output_dir) / job.dst_rel,
                      fs::copy_options::overwrite_existing);
    }

    // Calibration summaries as standalone JSON for consumers that do not
    // want to parse the whole manifest.
    {
        json cal = json::object();
        for (const auto& c : manifest.cameras)
            if (c.kind == CameraKind::lensed)
                cal[c.camera_id] = {{"distortion", c.distortion.to_json()},
                                    {"extrinsics", c.extrinsics.to_json()}};
        std::ofstream out((fs::path(output_dir) / "calibration" / "lensed_cameras.json").string());
        if (!out) throw IoError("package: cannot write calibration/lensed_cameras.json");
        out << cal.dump(2) << '\n';
    }
    {
        json homs = json::object();
        for (const auto& [id, h] : manifest.homographies) homs[id] = h;
        std::ofstream out((fs::path(output_dir) / "calibration" / "homographies.json").string());
        if (!out) throw IoError("package: cannot write calibration/homographies.json");
        out << homs.dump(2) << '\n';
    }

    packaged.root_dir = output_dir;
    json mj = packaged.to_json();
    mj["packaged_at"] = utc_timestamp();
    validate_manifest_json(mj);

    const std::string manifest_path = (fs::path(output_dir) / "manifest.json").string();
    std::ofstream out(manifest_path);
    if (!out) throw IoError("package: cannot write " + manifest_path);
    out << mj.dump(2) << '\n';
    if (!out) throw IoError("package: failed writing " + manifest_path);
    return manifest_path;
}

} // namespace parlens
