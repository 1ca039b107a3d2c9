#include "parlens/fista.hpp"

#include <cmath>
#include <fstream>

namespace parlens {

using nlohmann::json;

void SolverConfig::validate() const {
    if (max_iterations < 1) throw ValueError("SolverConfig: max_iterations must be >= 1");
    if (step_rule == StepRule::fixed && fixed_step <= 0.0)
        throw ValueError("SolverConfig: fixed step must be positive");
    if (tolerance < 0.0) throw ValueError("SolverConfig: tolerance must be non-negative");
    if (power_iterations < 1) throw ValueError("SolverConfig: power_iterations must be >= 1");
}

json SolverConfig::to_json() const {
    json j;
    j["max_iterations"] = max_iterations;
    j["step_size"] = step_rule == StepRule::auto_power_iteration
                         ? json("auto_power_iteration")
                         : json(fixed_step);
    j["prox"] = prox == Prox::nonnegativity ? "nonnegativity" : "identity";
    j["tolerance"] = tolerance;
    j["record_history"] = record_history;
    j["power_iterations"] = power_iterations;
    return j;
}

SolverConfig SolverConfig::from_json(const json& j) {
    SolverConfig c;
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    if (j.contains("step_size")) {
        if (j["step_size"].is_number()) {
            c.step_rule = StepRule::fixed;
            c.fixed_step = j["step_size"].get<double>();
        } else if (j["step_size"].get<std::string>() != "auto_power_iteration") {
            throw ConfigError("SolverConfig: unknown step_size");
        }
    }
    if (j.contains("prox")) {
        const auto p = j["prox"].get<std::string>();
        if (p == "nonnegativity")
            c.prox = Prox::nonnegativity;
        else if (p == "identity")
            c.prox = Prox::identity;
        else
            throw ConfigError("SolverConfig: unknown prox: " + p);
    }
    c.tolerance = j.value("tolerance", c.tolerance);
    c.record_history = j.value("record_history", c.record_history);
    c.power_iterations = j.value("power_iterations", c.power_iterations);
    c.validate();
    return c;
}

namespace {

double dot(const Image& a, const Image& b) {
    double s = 0.0;
    const auto& da = a.data();
    const auto& db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) s += da[i] * db[i];
    return s;
}

} // namespace

double estimate_lipschitz(const PointSpreadFunction& psf, const PixelGrid& sensor_window,
                          const Shape& scene_shape, int iters) {
    if (iters < 1) throw ValueError("estimate_lipschitz: iters must be >= 1");
    psf.validate();
    if (psf.image.max() <= 0.0) throw ValueError("estimate_lipschitz: zero PSF");

    Image v(scene_shape.rows, scene_shape.cols, psf.image.channels(), 1.0);
    const double n0 = std::sqrt(dot(v, v));
    v *= 1.0 / n0;

    double lambda = 0.0;
    for (int k = 0; k < iters; ++k) {
        Image w = adjoint(forward(v, psf, sensor_window), psf, sensor_window, scene_shape);
        lambda = dot(v, w);  // Rayleigh quotient; ||v|| == 1
        const double norm = std::sqrt(dot(w, w));
        if (norm == 0.0) return 0.0;
        w *= 1.0 / norm;
        v = std::move(w);
    }
    return lambda;
}

SolverResult fista(const Measurement& measurement, const PointSpreadFunction& psf,
                   const SolverConfig& config, const Shape& scene_shape,
                   const PixelGrid* sensor_window) {
    config.validate();
    psf.validate();
    const Image& b = measurement.image;
    const Shape ext = full_extent(scene_shape, psf.image.shape());
    const PixelGrid window = sensor_window ? *sensor_window : centered_window(ext, b.shape());
    if (window.shape() != b.shape())
        throw ShapeError("fista: sensor window does not match measurement extent");

    SolverResult result;
    double step;
    if (config.step_rule == SolverConfig::StepRule::fixed) {
        step = config.fixed_step;
        result.lipschitz_estimate = 1.0 / step;
    } else {
        const double lhat = estimate_lipschitz(psf, window, scene_shape, config.power_iterations);
        if (lhat <= 0.0) throw ValueError("fista: degenerate operator (L estimate <= 0)");
        // Power iteration approaches L from below; leave headroom.
        step = 0.95 / lhat;
        result.lipschitz_estimate = lhat;
    }

    const int channels = b.channels();
    Image x(scene_shape.rows, scene_shape.cols, channels, 0.0);
    Image y = x;
    double t = 1.0;
    double prev_objective = 0.0;

    for (int k = 0; k < config.max_iterations; ++k) {
        Image residual = forward(y, psf, window);
        residual -= b;
        Image grad = adjoint(residual, psf, window, scene_shape);

        Image x_next = y;
        {
            auto& xd = x_next.data();
            const auto& gd = grad.data();
            for (std::size_t i = 0; i < xd.size(); ++i) {
                double v = xd[i] - step * gd[i];
                if (config.prox == SolverConfig::Prox::nonnegativity && v < 0.0) v = 0.0;
                xd[i] = v;
            }
        }
        if (!x_next.all_finite())
            throw ValueError("fista: non-finite iterate (step size too large?)");

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        {
            auto& yd = y.data();
            const auto& xn = x_next.data();
            const auto& xp = x.data();
            for (std::size_t i = 0; i < yd.size(); ++i)
                yd[i] = xn[i] + beta * (xn[i] - xp[i]);
        }
        x = std::move(x_next);
        t = t_next;
        result.iterations_run = k + 1;

        double objective = 0.0;
        if (config.record_history || config.tolerance > 0.0) {
            Image r = forward(x, psf, window);
            r -= b;
            objective = 0.5 * dot(r, r);
            if (config.record_history) result.objective_history.push_back(objective);
        }
        if (config.tolerance > 0.0 && k > 0) {
            const double denom = std::max(std::abs(prev_objective), 1e-300);
            if (std::abs(prev_objective - objective) / denom < config.tolerance) break;
        }
        prev_objective = objective;
    }

    result.estimate = std::move(x);
    return result;
}

std::map<std::string, SolverResult> reconstruct_pair(
    const std::map<std::string, Measurement>& measurements,
    const std::map<std::string, PointSpreadFunction>& psfs, const SolverConfig& config,
    const std::map<std::string, Shape>& scene_shapes) {
    for (const auto& [label, psf] : psfs)
        if (!measurements.contains(label))
            throw ValueError("reconstruct_pair: PSF label '" + label + "' has no measurement");

    std::map<std::string, SolverResult> results;
    for (const auto& [label, m] : measurements) {
        auto psf_it = psfs.find(label);
        if (psf_it == psfs.end())
            throw ValueError("reconstruct_pair: measurement label '" + label + "' has no PSF");
        Shape scene_shape;
        if (auto it = scene_shapes.find(label); it != scene_shapes.end()) {
            scene_shape = it->second;
        } else {
            // Default reconstruction grid: the full-convolution extent.
            scene_shape = full_extent(m.image.shape(), psf_it->second.image.shape());
        }
        results.emplace(label, fista(m, psf_it->second, config, scene_shape));
    }
    return results;
}

void write_objective_csv(const std::string& path, const std::vector<double>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("write_objective_csv: cannot open " + path);
    out << "iteration,objective\n";
    out.precision(17);
    for (std::size_t i = 0; i < history.size(); ++i) out << i + 1 << "," << history[i] << "\n";
}

} // namespace parlens
