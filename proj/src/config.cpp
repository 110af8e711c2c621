#include "cvl/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cvl {

using nlohmann::json;

void ExperimentConfig::validate() const {
    synth.validate();
    require(runs >= 0, "run count must be >= 0");
    require(analysis.method == "matrix" || analysis.method == "lockin" ||
                analysis.method == "both",
            "analysis method must be matrix, lockin, or both");
    require(analysis.threshold >= 0, "threshold must be >= 0");
}

namespace {

json layout_to_json(const ModeLayout& l) {
    return {{"mode_count", l.mode_count},
            {"spacing_hz", l.spacing_hz},
            {"bin_width_hz", l.bin_width_hz},
            {"start_center_hz", l.start_center_hz},
            {"guard_modes", l.guard_modes}};
}
ModeLayout layout_from_json(const json& j) {
    ModeLayout l;
    l.mode_count = j.at("mode_count").get<int>();
    l.spacing_hz = j.at("spacing_hz").get<double>();
    l.bin_width_hz = j.at("bin_width_hz").get<double>();
    l.start_center_hz = j.at("start_center_hz").get<double>();
    l.guard_modes = j.at("guard_modes").get<int>();
    return l;
}

json synth_to_json_obj(const SynthConfig& c) {
    json tones = json::array();
    for (const auto& t : c.drive.tones)
        tones.push_back({{"frequency_hz", t.frequency_hz},
                         {"mod_index", t.mod_index},
                         {"phase_rad", t.phase_rad}});
    std::string beam = c.drive.target_beam == Beam::Probe
                           ? "probe"
                           : (c.drive.target_beam == Beam::Conjugate ? "conjugate" : "both-halved");
    return {{"layout", layout_to_json(c.layout)},
            {"profile_r", c.profile.r_of_bin},
            {"drive", {{"tones", tones}, {"target_beam", beam}}},
            {"quad_config", to_string(c.quad_config)},
            {"delay_s", c.delay_s},
            {"elec_noise_db", c.elec_noise_db},
            {"sample_dt_s", c.sample_dt_s},
            {"samples", c.samples},
            {"digitizer_bits", c.digitizer_bits},
            {"fullscale", c.fullscale},
            {"seed", c.seed},
            {"lo_phase_jitter_rad", c.lo_phase_jitter_rad}};
}

SynthConfig synth_from_json_obj(const json& j) {
    SynthConfig c;
    c.layout = layout_from_json(j.at("layout"));
    c.profile.r_of_bin = j.at("profile_r").get<std::vector<double>>();
    for (const auto& t : j.at("drive").at("tones")) {
        DriveTone tone;
        tone.frequency_hz = t.at("frequency_hz").get<double>();
        tone.mod_index = t.at("mod_index").get<double>();
        tone.phase_rad = t.value("phase_rad", 0.0);
        c.drive.tones.push_back(tone);
    }
    std::string beam = j.at("drive").value("target_beam", "conjugate");
    c.drive.target_beam = beam == "probe" ? Beam::Probe
                          : beam == "both-halved" ? Beam::BothHalved
                                                  : Beam::Conjugate;
    c.quad_config = quad_from_string(j.value("quad_config", "XX"));
    c.delay_s = j.value("delay_s", 10.4e-9);
    c.elec_noise_db = j.value("elec_noise_db", -6.0);
    c.sample_dt_s = j.value("sample_dt_s", 1e-8);
    c.samples = j.value("samples", static_cast<int64_t>(1000000));
    c.digitizer_bits = j.value("digitizer_bits", 8);
    c.fullscale = j.value("fullscale", 8.0);
    c.seed = j.value("seed", static_cast<uint64_t>(1));
    c.lo_phase_jitter_rad = j.value("lo_phase_jitter_rad", 0.0);
    return c;
}

json experiment_to_json_obj(const ExperimentConfig& c) {
    return {{"version", c.version},
            {"name", c.name},
            {"synth", synth_to_json_obj(c.synth)},
            {"analysis",
             {{"normalization",
               c.analysis.normalization == NormalizeMode::ElecSubtract ? "elec-subtract"
                                                                       : "shot-ratio"},
              {"method", c.analysis.method},
              {"threshold", c.analysis.threshold},
              {"compensate_delay", c.analysis.compensate_delay},
              {"band_limit", c.analysis.band_limit}}},
            {"runs", c.runs},
            {"include_eom_off", c.include_eom_off}};
}

ExperimentConfig experiment_from_json_obj(const json& j) {
    ExperimentConfig c;
    c.version = j.value("version", 1);
    c.name = j.value("name", "custom");
    c.synth = synth_from_json_obj(j.at("synth"));
    if (j.contains("analysis")) {
        const auto& a = j.at("analysis");
        c.analysis.normalization = a.value("normalization", "elec-subtract") == "shot-ratio"
                                       ? NormalizeMode::ShotRatio
                                       : NormalizeMode::ElecSubtract;
        c.analysis.method = a.value("method", "both");
        c.analysis.threshold = a.value("threshold", 0.05);
        c.analysis.compensate_delay = a.value("compensate_delay", true);
        c.analysis.band_limit = a.value("band_limit", -1);
    }
    c.runs = j.value("runs", 12);
    c.include_eom_off = j.value("include_eom_off", true);
    return c;
}

}  // namespace

std::string synth_config_to_json(const SynthConfig& cfg) { return synth_to_json_obj(cfg).dump(); }
SynthConfig synth_config_from_json(const std::string& text) {
    return synth_from_json_obj(json::parse(text));
}
std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    return experiment_to_json_obj(cfg).dump(2) + "\n";
}
ExperimentConfig experiment_config_from_json(const std::string& text) {
    return experiment_from_json_obj(json::parse(text));
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    auto cfg = experiment_config_from_json(ss.str());
    cfg.validate();
    return cfg;
}

void save_config_file(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream os(path);
    require(os.good(), "cannot write config file: " + path);
    os << experiment_config_to_json(cfg);
}

namespace {

// modulation index from the drive and half-wave voltages: pi * V / (2 * Vpi)
constexpr double kHalfWaveVoltage = 260.0;
constexpr double kDriveVoltage = 30.0;
const double kModIndex = kDriveVoltage * 3.14159265358979323846 / (2.0 * kHalfWaveVoltage);

ExperimentConfig base_config() {
    ExperimentConfig c;
    c.synth.delay_s = 10.4e-9;
    c.synth.elec_noise_db = -6.0;
    c.synth.sample_dt_s = 1e-8;
    c.synth.samples = 1000000;  // 10 ms at 10 ns
    c.synth.digitizer_bits = 8;
    c.synth.fullscale = 8.0;
    c.synth.seed = 20210817;
    return c;
}

DriveSpec tones_khz(const std::vector<double>& freqs_khz) {
    DriveSpec d;
    for (double f : freqs_khz) d.tones.push_back({f * 1e3, kModIndex, 0.0});
    d.target_beam = Beam::Conjugate;
    return d;
}

// flat squeezing with excess low-frequency noise in the below-band guard:
// the unfiltered source gain below the first bin is strongly antisqueezed
SqueezeProfile flat_with_dc_excess(const ModeLayout& l, double epr, double r_dc) {
    SqueezeProfile p = SqueezeProfile::flat(l, SqueezeProfile::r_from_epr(epr));
    for (int b = 0; b < l.guard_modes; ++b)
        if (l.center_hz(b) < l.start_center_hz) p.r_of_bin[b] = r_dc;
    return p;
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c = base_config();
    c.name = name;
    auto& l = c.synth.layout;
    if (name == "fig2-1d") {
        l = {100, 200e3, 180e3, 100e3, 1};
        c.synth.profile = SqueezeProfile::smooth(l, 0.20, 7e6);
        c.synth.drive = tones_khz({200});
        c.runs = 12;
    } else if (name == "figs1-2d") {
        l = {200, 100e3, 90e3, 100e3, 1};
        c.synth.profile = flat_with_dc_excess(l, 0.5, 0.9);
        c.synth.drive = tones_khz({100, 500});
        c.runs = 12;
    } else if (name == "fig3-3d") {
        l = {200, 100e3, 90e3, 100e3, 1};
        c.synth.profile = flat_with_dc_excess(l, 0.5, 0.9);
        c.synth.drive = tones_khz({100, 300, 900});
        c.runs = 24;
    } else if (name == "figs4-4d") {
        l = {60, 100e3, 90e3, 100e3, 1};
        // sinh(4r) = 1: lattice edge weight J1 * sinh(4r) matches the observed 0.09
        c.synth.profile = flat_with_dc_excess(l, 1.0 / (1.0 + std::sqrt(2.0)), 0.9);
        c.synth.drive = tones_khz({100, 300, 900, 2700});
        c.runs = 24;
    } else {
        throw std::invalid_argument("unknown preset: " + name);
    }
    c.validate();
    return c;
}

std::vector<std::string> preset_names() { return {"fig2-1d", "figs1-2d", "fig3-3d", "figs4-4d"}; }

}  // namespace cvl
