// Synthetic homodyne trace generation. Sideband amplitudes are drawn in the
// frequency domain with two-mode-squeezed joint statistics, mixed across
// frequencies by the phase-modulator coupling (with arbitrary tone phases and
// folding of sub-DC sidebands), selected into the locked quadrature pair,
// delayed, overlaid with electronic noise, and digitized.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvl/layout.hpp"

namespace cvl {

enum class QuadConfig { XX, PP, XP };
enum class TraceKind { Signal, SignalOff, Shot, Elec };

std::string to_string(QuadConfig q);
std::string to_string(TraceKind k);
QuadConfig quad_from_string(const std::string& s);
TraceKind kind_from_string(const std::string& s);

struct SynthConfig {
    ModeLayout layout;
    SqueezeProfile profile;
    DriveSpec drive;
    QuadConfig quad_config = QuadConfig::XX;
    double delay_s = 10.4e-9;        // group delay applied to the conjugate
    double elec_noise_db = -6.0;     // electronic floor relative to shot; <= -200 disables
    double sample_dt_s = 1e-8;
    int64_t samples = 1000000;
    int digitizer_bits = 8;
    double fullscale = 8.0;
    uint64_t seed = 1;
    double lo_phase_jitter_rad = 0.0;  // optional white phase jitter on the conjugate lock

    double window_s() const { return samples * sample_dt_s; }
    void validate() const;
};

struct TraceSet {
    std::vector<int16_t> probe_codes;
    std::vector<int16_t> conj_codes;
    double quant_step = 0.0;
    double clip_fraction_probe = 0.0;
    double clip_fraction_conj = 0.0;
    std::string probe_label, conj_label;  // "Xp"/"Pp" and "Xc"/"Pc"
    TraceKind kind = TraceKind::Signal;
    SynthConfig config;

    std::vector<double> probe() const;
    std::vector<double> conjugate() const;
};

// EOM on, squeezing per profile
TraceSet synth_traces(const SynthConfig& config);
// squeezing per profile, drive off (the red-curve reference)
TraceSet eom_off_traces(const SynthConfig& config);
// vacuum input (blocked signal ports); electronic noise still present
TraceSet shot_traces(const SynthConfig& config);
// detectors dark: electronic noise only
TraceSet elec_traces(const SynthConfig& config);

struct QuantizeResult {
    std::vector<int16_t> codes;
    double step = 0.0;
    double clip_fraction = 0.0;
};
// uniform mid-tread quantization, clipping at +-fullscale
QuantizeResult quantize(const std::vector<double>& trace, int bits, double fullscale);

// squeezing parameter at an arbitrary frequency: bin value inside a bin band,
// linear interpolation across gaps, vacuum above the top band
double profile_r_at(const ModeLayout& layout, const SqueezeProfile& profile, double f_hz);

}  // namespace cvl
