#pragma once

#include <string>
#include <vector>

#include "parlens/acquisition.hpp"
#include "parlens/fista.hpp"
#include "parlens/metrology.hpp"

namespace parlens {

/// Fully resolved run description, loaded from a JSON config file. Paths in
/// the file are interpreted relative to the file's own directory.
struct RunConfig {
    std::string input_dir;   ///< directory of display images (PNG/PFM)
    std::string output_dir;
    std::uint64_t seed = 1;
    DisplayMode mode = DisplayMode::per_camera;
    Shape display_shape{300, 300};
    double exposure_target_fraction = 0.9;
    bool include_calibration_target = true;
    std::string run_id = "run";
    std::int64_t inter_camera_delay_ms = 200;
    std::int64_t inter_image_delay_ms = 500;
    SolverConfig solver;

    struct CameraEntry {
        VirtualCamera camera;
        std::string psf_path;  ///< lensless cameras: PSF file to load
    };
    std::vector<CameraEntry> cameras;

    static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir);
    static RunConfig load(const std::string& path);

    /// Fails on unresolvable paths and inconsistent entries. Runs before
    /// any output is written.
    void validate() const;
};

/// Image id of the rendered circles-grid display frame that simulate
/// prepends when include_calibration_target is set; the registration stage
/// keys on it.
inline constexpr const char* kCalTargetImageId = "caltarget";

/// Render the calibration-target display frame for a given display shape
/// (4x11 asymmetric circles grid scaled to fit).
Image make_calibration_target(const Shape& display_shape);

/// Exposure calibration + acquisition run. Returns the manifest path.
std::string simulate_run(const RunConfig& config);

/// FISTA reconstruction of every lensless record; writes
/// reconstructions/<stem>.pfm (+ preview + objective CSV) next to the
/// manifest and records the paths in it.
void reconstruct_manifest(const std::string& manifest_path, const SolverConfig& solver);

/// Registration of every lensless camera against the lensed ground truth:
/// undistorts the ground-truth calibration-target capture, detects the grid
/// in it and in the camera's reconstruction, estimates the homography (DLT
/// + photometric refinement), warps all reconstructions into the
/// ground-truth frame, and records per-record PSNR on the interior.
void register_manifest(const std::string& manifest_path);

/// Border band (px) excluded from fidelity scoring after registration,
/// where warp zero-fill would otherwise dominate.
inline constexpr int kRegistrationFidelityMargin = 4;

/// Autocorrelation analysis of one or more PSF files: per-PSF radial
/// profile CSVs and a combined JSON report (including the pairwise
/// comparison when exactly two PSFs are given), written under output_dir.
nlohmann::json analyze_psfs(const std::vector<std::string>& psf_paths,
                            const std::string& output_dir);

} // namespace parlens
