#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parlens/convolve.hpp"
#include "parlens/sensor.hpp"

namespace parlens {

struct SolverConfig {
    enum class StepRule { auto_power_iteration, fixed };
    enum class Prox { nonnegativity, identity };

    int max_iterations = 200;
    StepRule step_rule = StepRule::auto_power_iteration;
    double fixed_step = 0.0;        // used when step_rule == fixed
    Prox prox = Prox::nonnegativity;
    double tolerance = 0.0;         // relative objective change; 0 disables early stop
    bool record_history = true;
    int power_iterations = 50;

    void validate() const;

    nlohmann::json to_json() const;
    static SolverConfig from_json(const nlohmann::json& j);
};

struct SolverResult {
    Image estimate;
    std::vector<double> objective_history;  // 0.5 * ||A x_k - b||^2 per iteration
    int iterations_run = 0;
    double lipschitz_estimate = 0.0;        // operator-norm^2 estimate backing the step
};

/// Largest eigenvalue of A^T A by power iteration from a deterministic
/// all-ones start vector. Rayleigh quotients are monotone non-decreasing
/// within round-off.
double estimate_lipschitz(const PointSpreadFunction& psf, const PixelGrid& sensor_window,
                          const Shape& scene_shape, int iters = 50);

/// FISTA on 0.5 * ||A x - b||^2 with an optional non-negativity projection:
/// x0 = 0, gradient step 1/L, Nesterov momentum t_{k+1} = (1+sqrt(1+4t^2))/2.
/// Runs exactly max_iterations unless the relative-objective tolerance
/// triggers. Deterministic. The sensor window defaults to the centered
/// placement of the measurement inside the full-convolution extent.
SolverResult fista(const Measurement& measurement, const PointSpreadFunction& psf,
                   const SolverConfig& config, const Shape& scene_shape,
                   const PixelGrid* sensor_window = nullptr);

/// Independent FISTA runs per camera, keyed by camera id. Labels of the two
/// maps must align. Cameras without an entry in scene_shapes reconstruct on
/// the default grid (measurement extent + PSF - 1).
std::map<std::string, SolverResult> reconstruct_pair(
    const std::map<std::string, Measurement>& measurements,
    const std::map<std::string, PointSpreadFunction>& psfs, const SolverConfig& config,
    const std::map<std::string, Shape>& scene_shapes = {});

/// CSV export: header "iteration,objective", one row per recorded iterate.
void write_objective_csv(const std::string& path, const std::vector<double>& history);

} // namespace parlens
