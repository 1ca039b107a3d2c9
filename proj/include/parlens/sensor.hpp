#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "parlens/image.hpp"

namespace parlens {

/// CMOS-style noise model: Poisson shot noise at a configurable photon
/// scale, additive Gaussian read noise, clipping at the full well and
/// optional uniform quantization.
struct SensorModel {
    double full_well_fraction = 1.0;
    double read_noise_sigma = 0.002;
    double shot_noise_scale = 10000.0;
    int bit_depth = 12;
    bool quantize = true;

    void validate() const;

    nlohmann::json to_json() const;
    static SensorModel from_json(const nlohmann::json& j);

    /// All stochastic and lossy stages disabled; sense() becomes the
    /// identity on in-range inputs.
    static SensorModel noiseless() {
        SensorModel m;
        m.read_noise_sigma = 0.0;
        m.shot_noise_scale = 0.0;
        m.quantize = false;
        return m;
    }
};

/// One simulated sensor frame plus its acquisition metadata.
struct Measurement {
    Image image;
    std::string camera_id;
    double exposure_scale = 1.0;
    double saturated_fraction = 0.0;
    std::int64_t trigger_time_ms = 0;
    std::string source_image_id;
};

/// Applies exposure scaling, shot noise, read noise, full-well clipping and
/// quantization to an ideal (noiseless, non-negative) frame. Deterministic
/// for a fixed seed. saturated_fraction counts pixels that hit the full
/// well before clipping.
Measurement sense(const Image& ideal, const SensorModel& sensor, double exposure_scale,
                  std::uint64_t rng_seed);

/// Per-record RNG seed derived from the run seed and record identity, so a
/// record's noise stream is stable no matter where it falls in the run.
std::uint64_t record_seed(std::uint64_t run_seed, std::string_view image_id,
                          std::string_view camera_id);

} // namespace parlens
