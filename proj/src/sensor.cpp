#include "parlens/sensor.hpp"

#include <cmath>
#include <random>

namespace parlens {

void SensorModel::validate() const {
    if (full_well_fraction <= 0.0) throw ValueError("SensorModel: full well must be positive");
    if (read_noise_sigma < 0.0 || shot_noise_scale < 0.0)
        throw ValueError("SensorModel: noise parameters must be non-negative");
    if (bit_depth < 8 || bit_depth > 16)
        throw ValueError("SensorModel: bit depth must be in [8, 16]");
}

nlohmann::json SensorModel::to_json() const {
    return {{"full_well_fraction", full_well_fraction},
            {"read_noise_sigma", read_noise_sigma},
            {"shot_noise_scale", shot_noise_scale},
            {"bit_depth", bit_depth},
            {"quantize", quantize}};
}

SensorModel SensorModel::from_json(const nlohmann::json& j) {
    SensorModel m;
    try {
        m.full_well_fraction = j.value("full_well_fraction", m.full_well_fraction);
        m.read_noise_sigma = j.value("read_noise_sigma", m.read_noise_sigma);
        m.shot_noise_scale = j.value("shot_noise_scale", m.shot_noise_scale);
        m.bit_depth = j.value("bit_depth", m.bit_depth);
        m.quantize = j.value("quantize", m.quantize);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sensor model: ") + e.what());
    }
    m.validate();
    return m;
}

Measurement sense(const Image& ideal, const SensorModel& sensor, double exposure_scale,
                  std::uint64_t rng_seed) {
    sensor.validate();
    if (ideal.empty()) throw ValueError("sense: empty input");
    if (ideal.min() < 0.0) throw ValueError("sense: negative input sample");
    if (exposure_scale <= 0.0) throw ValueError("sense: exposure scale must be positive");

    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> read_noise(0.0, 1.0);

    Measurement m;
    m.exposure_scale = exposure_scale;
    m.image = ideal;
    m.image.set_bit_depth_hint(BitDepthHint::floating);

    const double full_well = sensor.full_well_fraction;
    const double levels = static_cast<double>((1u << sensor.bit_depth) - 1u);
    std::size_t saturated = 0;

    for (double& v : m.image.data()) {
        double x = v * exposure_scale;
        if (sensor.shot_noise_scale > 0.0) {
            std::poisson_distribution<long long> shot(x * sensor.shot_noise_scale);
            x = static_cast<double>(shot(rng)) / sensor.shot_noise_scale;
        }
        if (sensor.read_noise_sigma > 0.0) x += sensor.read_noise_sigma * read_noise(rng);
        if (x >= full_well) ++saturated;
        x = std::fmin(std::fmax(x, 0.0), full_well);
        if (sensor.quantize) x = std::floor(x / full_well * levels + 0.5) / levels * full_well;
        v = x;
    }
    m.saturated_fraction = static_cast<double>(saturated) / static_cast<double>(m.image.sample_count());
    return m;
}

std::uint64_t record_seed(std::uint64_t run_seed, std::string_view image_id,
                          std::string_view camera_id) {
    // FNV-1a over the identifying strings, then a splitmix64 finalizer to
    // spread low-entropy run seeds across the state space.
    std::uint64_t h = 1469598103934665603ull;
    auto mix_bytes = [&h](std::string_view s) {
        for (unsigned char b : s) {
            h ^= b;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    mix_bytes(image_id);
    mix_bytes(camera_id);
    h ^= run_seed + 0x9e3779b97f4a7c15ull;
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

} // namespace parlens
