// Command-line front end: simulate / reconstruct / register / analyze-psf /
// package, plus synth-psf for generating test PSFs. Errors are emitted as
// one-line JSON on stderr so pipelines can parse failures.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parlens/image_io.hpp"
#include "parlens/package.hpp"
#include "parlens/pipeline.hpp"
#include "parlens/psf.hpp"

namespace {

using nlohmann::json;

void emit_error(const std::string& code, const std::string& message) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
}

struct Options {
    std::string config_path;
    std::string manifest_path;
    std::string output_dir;
    std::vector<std::string> psf_paths;
    bool quiet = false;

    // overrides
    std::int64_t seed = -1;
    int iterations = -1;
    double tolerance = -1.0;
    std::string mode;

    // synth-psf
    std::string psf_kind = "diffuser";
    std::string psf_output;
    std::vector<int> psf_shape{31, 31};
    int psf_features = 60;
    double psf_sigma = 1.4;
    std::uint64_t psf_seed = 7;
};

void report(const Options& opt, const std::string& line) {
    if (!opt.quiet) std::cout << line << '\n';
}

int run_simulate(const Options& opt) {
    parlens::RunConfig config = parlens::RunConfig::load(opt.config_path);
    if (opt.seed >= 0) config.seed = static_cast<std::uint64_t>(opt.seed);
    if (!opt.output_dir.empty()) config.output_dir = opt.output_dir;
    if (!opt.mode.empty()) config.mode = parlens::display_mode_from_name(opt.mode);
    const std::string manifest = parlens::simulate_run(config);
    report(opt, manifest);
    return 0;
}

int run_reconstruct(const Options& opt) {
    parlens::SolverConfig solver;
    if (opt.iterations >= 0) solver.max_iterations = opt.iterations;
    if (opt.tolerance >= 0.0) solver.tolerance = opt.tolerance;
    parlens::reconstruct_manifest(opt.manifest_path, solver);
    report(opt, opt.manifest_path);
    return 0;
}

int run_register(const Options& opt) {
    parlens::register_manifest(opt.manifest_path);
    report(opt, opt.manifest_path);
    return 0;
}

int run_analyze(const Options& opt) {
    const std::string out = opt.output_dir.empty() ? std::string(".") : opt.output_dir;
    parlens::analyze_psfs(opt.psf_paths, out);
    report(opt, out + "/psf_analysis.json");
    return 0;
}

int run_package(const Options& opt) {
    const parlens::DatasetManifest manifest = parlens::DatasetManifest::load(opt.manifest_path);
    const std::string path = parlens::package_dataset(manifest, opt.output_dir);
    report(opt, path);
    return 0;
}

int run_synth_psf(const Options& opt) {
    const parlens::Shape shape{opt.psf_shape.at(0), opt.psf_shape.at(1)};
    parlens::PointSpreadFunction psf;
    if (opt.psf_kind == "diffuser")
        psf = parlens::synth_diffuser_psf(shape, opt.psf_features, opt.psf_sigma, opt.psf_seed);
    else if (opt.psf_kind == "lenslet")
        psf = parlens::synth_lenslet_psf(shape, opt.psf_features, opt.psf_sigma, opt.psf_seed);
    else
        throw parlens::ConfigError("synth-psf: unknown kind '" + opt.psf_kind +
                                   "' (expected diffuser or lenslet)");
    parlens::save_psf(psf, opt.psf_output);
    report(opt, opt.psf_output);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parallel lensless-imaging dataset pipeline"};
    app.require_subcommand(1);
    Options opt;

    auto* simulate = app.add_subcommand("simulate", "Calibrate exposures and run the capture");
    simulate->add_option("--config", opt.config_path, "Run config JSON")->required();
    simulate->add_option("--seed", opt.seed, "Override the config seed");
    simulate->add_option("--output", opt.output_dir, "Override the output directory");
    simulate->add_option("--mode", opt.mode, "Display mode: shared or per-camera");

    auto* reconstruct = app.add_subcommand("reconstruct", "FISTA-reconstruct lensless records");
    reconstruct->add_option("--manifest", opt.manifest_path, "Run manifest")->required();
    reconstruct->add_option("--iterations", opt.iterations, "Solver iteration count");
    reconstruct->add_option("--tolerance", opt.tolerance, "Relative objective early-stop");

    auto* register_cmd =
        app.add_subcommand("register", "Align reconstructions to the lensed ground truth");
    register_cmd->add_option("--manifest", opt.manifest_path, "Run manifest")->required();

    auto* analyze = app.add_subcommand("analyze-psf", "Autocorrelation quality analysis");
    analyze->add_option("psfs", opt.psf_paths, "PSF file(s)")->required()->expected(-1);
    analyze->add_option("--output", opt.output_dir, "Report directory");

    auto* package_cmd = app.add_subcommand("package", "Assemble the canonical dataset layout");
    package_cmd->add_option("--manifest", opt.manifest_path, "Run manifest")->required();
    package_cmd->add_option("--output", opt.output_dir, "Package directory")->required();

    auto* synth = app.add_subcommand("synth-psf", "Generate a synthetic PSF file");
    synth->add_option("--kind", opt.psf_kind, "diffuser or lenslet");
    synth->add_option("--shape", opt.psf_shape, "Rows and columns")->expected(2);
    synth->add_option("--features", opt.psf_features, "Blob / impulse count");
    synth->add_option("--sigma", opt.psf_sigma, "Feature width in pixels");
    synth->add_option("--seed", opt.psf_seed, "Generator seed");
    synth->add_option("--output", opt.psf_output, "Output PFM path")->required();

    for (auto* sub : {simulate, reconstruct, register_cmd, analyze, package_cmd, synth})
        sub->add_flag("--quiet", opt.quiet, "Suppress the result line on stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 2;
    }

    try {
        if (app.got_subcommand(simulate)) return run_simulate(opt);
        if (app.got_subcommand(reconstruct)) return run_reconstruct(opt);
        if (app.got_subcommand(register_cmd)) return run_register(opt);
        if (app.got_subcommand(analyze)) return run_analyze(opt);
        if (app.got_subcommand(package_cmd)) return run_package(opt);
        if (app.got_subcommand(synth)) return run_synth_psf(opt);
    } catch (const parlens::Error& e) {
        emit_error(e.code(), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
    emit_error("usage", "no subcommand selected");
    return 2;
}
