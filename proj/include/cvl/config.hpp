// Experiment configuration: JSON (de)serialization and named presets that
// encode the figure-analog parameter sets.
#pragma once

#include <string>
#include <vector>

#include "cvl/dsp.hpp"
#include "cvl/synth.hpp"

namespace cvl {

struct AnalysisOptions {
    NormalizeMode normalization = NormalizeMode::ElecSubtract;
    std::string method = "both";  // matrix | lockin | both
    double threshold = 0.05;
    bool compensate_delay = true;
    int band_limit = -1;  // same-quadrature covariance band; -1 = full
};

struct ExperimentConfig {
    int version = 1;
    std::string name = "custom";
    SynthConfig synth;
    AnalysisOptions analysis;
    int runs = 12;
    bool include_eom_off = true;

    void validate() const;
};

std::string synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const std::string& text);

std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);

ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const ExperimentConfig& cfg);

// fig2-1d, figs1-2d, fig3-3d, figs4-4d
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace cvl
