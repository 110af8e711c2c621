// cvl: simulate, analyze, and verify EOM-entangled two-mode-squeezed
// frequency-comb data.
//
// Exit codes: 0 success / structure pass, 1 structure verification failure,
// 2 invalid input or configuration.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cvl/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

cvl::ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset,
                                     int runs_override, int64_t seed_override,
                                     const std::string& method_override) {
    cvl::require(!config_path.empty() || !preset.empty(), "need --config or --preset");
    cvl::ExperimentConfig cfg =
        !config_path.empty() ? cvl::load_config_file(config_path) : cvl::preset(preset);
    if (runs_override >= 0) cfg.runs = runs_override;
    if (seed_override >= 0) cfg.synth.seed = static_cast<uint64_t>(seed_override);
    if (!method_override.empty()) cfg.analysis.method = method_override;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-variable cluster-state simulation and analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, preset_name, out_dir = "out", method;
    int runs = -1;
    int64_t seed = -1;
    double threshold = -1.0;
    app.add_option("--config", config_path, "experiment config JSON");
    app.add_option("--preset", preset_name, "named preset (fig2-1d, figs1-2d, fig3-3d, figs4-4d)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--runs", runs, "override run count");
    app.add_option("--seed", seed, "override master seed");
    app.add_option("--method", method, "nullifier method: matrix, lockin, or both");
    app.add_option("--threshold", threshold, "adjacency threshold override");

    auto* sim = app.add_subcommand("simulate", "synthesize trace files and a manifest");
    auto* ana = app.add_subcommand("analyze", "run the analysis pipeline on a manifest");
    std::string manifest_path;
    ana->add_option("--manifest", manifest_path, "manifest.json from simulate");
    auto* theo = app.add_subcommand("theory", "analytic covariance, nullifiers, graphs");
    auto* ver = app.add_subcommand("verify", "verify cluster structure of a covariance file");
    std::string covariance_path;
    ver->add_option("--covariance", covariance_path, "covariance file (.cvl1 or .csv)");
    auto* pre = app.add_subcommand("presets", "list available presets");
    for (auto* sub : {sim, ana, theo, ver, pre}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pre->parsed()) {
            for (const auto& name : cvl::preset_names()) std::cout << name << "\n";
            return 0;
        }
        if (sim->parsed()) {
            auto cfg = resolve_config(config_path, preset_name, runs, seed, method);
            auto manifest = cvl::simulate(cfg, out_dir);
            std::cout << "wrote " << manifest.files.size() << " trace files to " << out_dir
                      << "\n";
            return 0;
        }
        if (ana->parsed()) {
            fs::path mpath = manifest_path.empty() ? fs::path(out_dir) / "manifest.json"
                                                   : fs::path(manifest_path);
            auto manifest = cvl::read_manifest(mpath);
            if (runs >= 0 || seed >= 0 || !method.empty()) {
                if (!method.empty()) manifest.config.analysis.method = method;
            }
            auto result = cvl::analyze(manifest, mpath.parent_path());
            cvl::write_analysis(result, manifest.config, out_dir);
            if (result.delay_estimate_s)
                std::cout << "delay estimate: " << *result.delay_estimate_s * 1e9 << " ns\n";
            std::cout << "analysis written to " << out_dir << "\n";
            return 0;
        }
        if (theo->parsed()) {
            auto cfg = resolve_config(config_path, preset_name, runs, seed, method);
            if (threshold >= 0) cfg.analysis.threshold = threshold;
            auto result = cvl::theory(cfg);
            cvl::write_theory(result, cfg, out_dir);
            std::cout << "theory written to " << out_dir << "\n";
            return 0;
        }
        if (ver->parsed()) {
            auto cfg = resolve_config(config_path, preset_name, runs, seed, method);
            if (threshold >= 0) cfg.analysis.threshold = threshold;
            cvl::require(!covariance_path.empty(), "verify needs --covariance");
            cvl::CovarianceMatrix sigma =
                covariance_path.size() > 4 &&
                        covariance_path.substr(covariance_path.size() - 4) == ".csv"
                    ? cvl::read_covariance_csv(covariance_path)
                    : cvl::read_covariance_binary(covariance_path);
            if (sigma.norm != cvl::Normalization::ShotNormalized)
                sigma = cvl::shot_normalize(sigma);
            auto rep = cvl::verify(sigma, cfg, cfg.analysis.threshold);
            fs::create_directories(out_dir);
            std::ofstream os(fs::path(out_dir) / "structure_report.json");
            os << cvl::structure_report_json(rep);
            std::cout << (rep.pass ? "PASS" : "FAIL") << ": matched " << rep.matched.size()
                      << ", missing " << rep.missing.size() << ", extraneous "
                      << rep.extraneous.size() << ", traceback " << rep.traceback.size() << "\n";
            return rep.pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
