#pragma once

#include <string>

#include "parlens/acquisition.hpp"

namespace parlens {

/// Structural schema check for a serialized manifest: required fields,
/// types, and value sanity. Throws ConfigError naming the offending field.
void validate_manifest_json(const nlohmann::json& j);

/// Assemble the canonical dataset layout under output_dir:
///   measurements/   lensless captures (PFM + PNG16 preview)
///   ground_truth/   lensed captures
///   reconstructions/, registered/   later-stage artifacts when present
///   psfs/           PSF rasters + sidecars
///   calibration/    distortion models and registration homographies
///   manifest.json   rewritten with the new relative paths
/// Every referenced file must exist (missing -> IoError naming it). The
/// output is byte-identical across repeated runs except the packaged_at
/// timestamp in manifest.json. Returns the packaged manifest path.
std::string package_dataset(const DatasetManifest& manifest, const std::string& output_dir);

} // namespace parlens
