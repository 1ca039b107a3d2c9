#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parlens/distortion.hpp"
#include "parlens/homography.hpp"
#include "parlens/psf.hpp"
#include "parlens/schedule.hpp"
#include "parlens/sensor.hpp"

namespace parlens {

enum class CameraKind { lensless, lensed };

std::string camera_kind_name(CameraKind kind);
CameraKind camera_kind_from_name(const std::string& name);

/// Simulated camera on the bench. A lensless camera images the display
/// through its PSF onto a cropped sensor window; the lensed camera sees the
/// display through an extrinsic homography and its lens distortion, and by
/// default at half exposure for the 50/50 beamsplitter feeding it.
struct VirtualCamera {
    std::string camera_id;
    CameraKind kind = CameraKind::lensless;
    SensorModel sensor;
    double exposure_scale = 1.0;

    // lensless: which stored PSF to image through, and the sensor-window
    // shape cut from the full convolution extent (always centered; {0,0}
    // means "same shape as the display").
    std::string psf_ref;
    Shape sensor_window_shape{0, 0};

    // lensed: display-to-camera mapping and the lens model.
    Homography extrinsics;
    DistortionModel distortion;

    void validate() const;

    nlohmann::json to_json() const;
    static VirtualCamera from_json(const nlohmann::json& j);
};

/// One journal line of the run: a single (image, camera) capture.
struct ManifestRecord {
    std::string image_id;
    std::string camera_id;
    std::string file;  ///< measurement path relative to the manifest
    std::int64_t trigger_time_ms = 0;
    double exposure_scale = 1.0;
    double saturated_fraction = 0.0;
    std::uint64_t seed = 0;

    // Filled by later pipeline stages; empty until then.
    std::string reconstruction;
    std::string registered;
    std::optional<double> psnr_db;

    nlohmann::json to_json() const;
    static ManifestRecord from_json(const nlohmann::json& j);
};

/// The run's journal and contract between pipeline stages: cameras,
/// schedule, per-capture records in trigger order, and calibration
/// references. All paths are relative to the directory holding the
/// manifest file.
struct DatasetManifest {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    std::string run_id = "run";
    std::string display_mode = "per-camera";
    Shape display_shape{300, 300};
    AcquisitionSchedule schedule;
    std::vector<VirtualCamera> cameras;
    std::vector<ManifestRecord> records;

    std::map<std::string, std::string> psf_files;       ///< psf_ref -> relative path
    std::map<std::string, PixelGrid> sensor_windows;    ///< camera_id -> window in conv extent
    std::map<std::string, nlohmann::json> homographies; ///< camera_id -> registration result
    bool complete = true;

    /// Directory the manifest was loaded from / should resolve paths
    /// against. Not serialized.
    std::string root_dir;

    const VirtualCamera& camera(const std::string& camera_id) const;
    std::string resolve(const std::string& relative_path) const;

    /// Structural checks: record count == |images| x |cameras|, exactly one
    /// record per (image, camera) pair, strictly increasing trigger times.
    void validate() const;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

/// Ideal (noiseless, exposure-1) frame a camera would capture of a display
/// image: the lensless forward model or the lensed warp+distortion render.
/// Also reports the sensor window used for lensless cameras.
Image render_ideal_frame(const Image& display, const VirtualCamera& camera,
                         const std::map<std::string, PointSpreadFunction>& psf_store,
                         PixelGrid* sensor_window_out = nullptr);

/// Exposure so that the 99.9th percentile of the camera's noiseless ideal
/// measurement of the reference lands at target_fraction x full well.
double calibrate_exposure(const Image& reference, const VirtualCamera& camera,
                          const std::map<std::string, PointSpreadFunction>& psf_store,
                          double target_fraction = 0.9);

struct AcquisitionOptions {
    Shape display_shape{300, 300};
    DisplayMode mode = DisplayMode::per_camera;
    std::string run_id = "run";
};

/// Deterministic discrete-event capture run over the virtual clock. Writes
/// one measurement PFM (plus PNG16 preview) per trigger under
/// output_dir/measurements/, saves referenced PSFs under output_dir/psfs/,
/// and returns the populated manifest (also saved to
/// output_dir/manifest.json). On a write failure the partial manifest is
/// saved flagged incomplete and the error rethrown.
DatasetManifest run_acquisition(const std::map<std::string, Image>& images,
                                const std::vector<VirtualCamera>& cameras,
                                const AcquisitionSchedule& schedule,
                                const std::map<std::string, PointSpreadFunction>& psf_store,
                                std::uint64_t seed, const std::string& output_dir,
                                const AcquisitionOptions& options = {});

} // namespace parlens
