#include "cvl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "cvl/bessel.hpp"
#include "cvl/fft.hpp"
#include "cvl/rng.hpp"

namespace cvl {

using cd = std::complex<double>;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::string to_string(QuadConfig q) {
    switch (q) {
        case QuadConfig::XX: return "XX";
        case QuadConfig::PP: return "PP";
        default: return "XP";
    }
}
std::string to_string(TraceKind k) {
    switch (k) {
        case TraceKind::Signal: return "signal";
        case TraceKind::SignalOff: return "signal-off";
        case TraceKind::Shot: return "shot";
        default: return "elec";
    }
}
QuadConfig quad_from_string(const std::string& s) {
    if (s == "XX") return QuadConfig::XX;
    if (s == "PP") return QuadConfig::PP;
    if (s == "XP") return QuadConfig::XP;
    throw std::invalid_argument("unknown quadrature config: " + s);
}
TraceKind kind_from_string(const std::string& s) {
    if (s == "signal") return TraceKind::Signal;
    if (s == "signal-off") return TraceKind::SignalOff;
    if (s == "shot") return TraceKind::Shot;
    if (s == "elec") return TraceKind::Elec;
    throw std::invalid_argument("unknown trace kind: " + s);
}

void SynthConfig::validate() const {
    layout.validate();
    profile.validate(layout);
    drive.validate(layout);
    require(samples >= 16 && samples % 2 == 0, "samples must be even and >= 16");
    require(sample_dt_s > 0, "sample_dt must be positive");
    double nyquist = 0.5 / sample_dt_s;
    double top_edge = layout.center_hz(layout.total_bins() - 1) + layout.bin_width_hz / 2;
    require(top_edge < nyquist, "top bin edge must be below Nyquist");
    double t = window_s();
    for (const auto& tone : drive.tones) {
        double periods = tone.frequency_hz * t;
        require(std::abs(periods - std::round(periods)) < 1e-6,
                "window must cover an integer number of periods of every tone");
    }
    // bins must land on the FFT grid so demodulation aligns exactly
    double su = layout.spacing_hz * t, st = layout.start_center_hz * t;
    require(std::abs(su - std::round(su)) < 1e-6 && std::abs(st - std::round(st)) < 1e-6,
            "bin spacing and start center must be integer multiples of the window resolution");
    require(digitizer_bits >= 2 && digitizer_bits <= 16, "digitizer bits must be in [2, 16]");
    require(fullscale > 0, "fullscale must be positive");
}

double profile_r_at(const ModeLayout& layout, const SqueezeProfile& profile, double f_hz) {
    int n = layout.total_bins();
    double w2 = layout.bin_width_hz / 2;
    double lo_center = layout.center_hz(0), hi_center = layout.center_hz(n - 1);
    if (f_hz <= lo_center + w2) return profile.r_of_bin.front();
    if (f_hz > hi_center + w2) return 0.0;  // vacuum above the simulated band
    double rel = (f_hz - lo_center) / layout.spacing_hz;
    int below = std::clamp(static_cast<int>(std::floor(rel)), 0, n - 1);
    double db = f_hz - layout.center_hz(below);
    if (db <= w2) return profile.r_of_bin[below];
    if (below + 1 < n && layout.center_hz(below + 1) - f_hz <= w2)
        return profile.r_of_bin[below + 1];
    // in the gap: interpolate between neighbouring band edges
    double gap_lo = layout.center_hz(below) + w2;
    double gap_hi = layout.center_hz(below + 1) - w2;
    double x = (f_hz - gap_lo) / (gap_hi - gap_lo);
    return (1 - x) * profile.r_of_bin[below] + x * profile.r_of_bin[below + 1];
}

namespace {

struct QuadAmps {
    // positive-frequency quadrature amplitudes, index 1..half-1 used
    std::vector<cd> xp, xc, pp, pc;
};

// value at a shifted index, folding negative frequencies back as conjugates
inline cd at(const std::vector<cd>& a, long idx, long half) {
    if (idx > 0 && idx < half) return a[idx];
    if (idx < 0 && -idx < half) return std::conj(a[-idx]);
    return cd(0, 0);  // DC and at/above Nyquist
}

void eom_pass(std::vector<cd>& x, std::vector<cd>& p, long half, long d, double m, double phase) {
    double j0 = bessel_j(0, m), j1 = bessel_j(1, m);
    cd up = j1 * std::polar(1.0, phase);    // content moved up by the drive
    cd down = j1 * std::polar(1.0, -phase); // content moved down
    std::vector<cd> x0(x), p0(p);
    for (long j = 1; j < half; ++j) {
        x[j] = j0 * x0[j] + up * at(p0, j - d, half) + down * at(p0, j + d, half);
        p[j] = j0 * p0[j] - up * at(x0, j - d, half) - down * at(x0, j + d, half);
    }
}

}  // namespace

static TraceSet synthesize(const SynthConfig& cfg, bool light, bool eom, TraceKind kind) {
    cfg.validate();
    const long n = cfg.samples;
    const long half = n / 2;
    const double df = 1.0 / cfg.window_s();
    GaussianStream rng(cfg.seed);

    QuadAmps amps;
    for (auto* v : {&amps.xp, &amps.xc, &amps.pp, &amps.pc}) v->assign(half, cd(0, 0));
    if (light) {
        for (long j = 1; j < half; ++j) {
            double g[8];
            for (double& gi : g) gi = rng.normal();
            double r = profile_r_at(cfg.layout, cfg.profile, j * df);
            // E|xp|^2 = cosh(4r)/2, E[xp conj(xc)] = sinh(4r)/2, vacuum 1/2:
            // the per-frequency analog of the analytic covariance convention
            double c = std::cosh(2 * r) / 2.0;
            double s = std::sinh(2 * r) / 2.0;
            amps.xp[j] = cd(c * g[0] + s * g[2], c * g[1] + s * g[3]);
            amps.xc[j] = cd(s * g[0] + c * g[2], s * g[1] + c * g[3]);
            amps.pp[j] = cd(c * g[4] - s * g[6], c * g[5] - s * g[7]);
            amps.pc[j] = cd(-s * g[4] + c * g[6], -s * g[5] + c * g[7]);
        }
        if (eom) {
            for (const auto& tone : cfg.drive.tones) {
                double periods = tone.frequency_hz * cfg.window_s();
                long d = std::lround(periods);
                double m = tone.mod_index;
                if (cfg.drive.target_beam == Beam::BothHalved) m /= 2;
                if (cfg.drive.target_beam == Beam::Probe || cfg.drive.target_beam == Beam::BothHalved)
                    eom_pass(amps.xp, amps.pp, half, d, m, tone.phase_rad);
                if (cfg.drive.target_beam == Beam::Conjugate ||
                    cfg.drive.target_beam == Beam::BothHalved)
                    eom_pass(amps.xc, amps.pc, half, d, m, tone.phase_rad);
            }
        }
    }

    const bool probe_is_x = (cfg.quad_config != QuadConfig::PP);
    const bool conj_is_x = (cfg.quad_config == QuadConfig::XX);
    std::vector<cd>& sel_p = probe_is_x ? amps.xp : amps.pp;
    std::vector<cd>& sel_c = conj_is_x ? amps.xc : amps.pc;

    // build half spectra with unit shot variance per sample
    const double beta = 1.0 / std::sqrt(static_cast<double>(half - 1));
    std::vector<cd> spec_p(half + 1, cd(0, 0)), spec_c(half + 1, cd(0, 0));
    for (long j = 1; j < half; ++j) {
        spec_p[j] = beta * sel_p[j];
        // the conjugate signal reaches its digitizer later by delay_s
        cd ramp = std::polar(1.0, -kTwoPi * (j * df) * cfg.delay_s);
        spec_c[j] = beta * sel_c[j] * ramp;
    }
    std::vector<double> probe = ifft_real(spec_p, static_cast<int>(n));
    std::vector<double> conj = ifft_real(spec_c, static_cast<int>(n));
    for (double& v : probe) v *= n;  // undo the 1/n of ifft_real
    for (double& v : conj) v *= n;

    if (cfg.lo_phase_jitter_rad > 0 && light && cfg.quad_config == QuadConfig::XP) {
        // white phase jitter on the conjugate lock mixes in the orthogonal quadrature
        std::vector<cd> spec_o(half + 1, cd(0, 0));
        for (long j = 1; j < half; ++j)
            spec_o[j] = beta * amps.xc[j] * std::polar(1.0, -kTwoPi * (j * df) * cfg.delay_s);
        std::vector<double> ortho = ifft_real(spec_o, static_cast<int>(n));
        for (long t = 0; t < n; ++t) {
            double th = cfg.lo_phase_jitter_rad * rng.normal();
            conj[t] = std::cos(th) * conj[t] + std::sin(th) * (ortho[t] * n);
        }
    }

    if (cfg.elec_noise_db > -200) {
        double sigma = std::sqrt(std::pow(10.0, cfg.elec_noise_db / 10.0));
        for (long t = 0; t < n; ++t) probe[t] += sigma * rng.normal();
        for (long t = 0; t < n; ++t) conj[t] += sigma * rng.normal();
    }

    TraceSet out;
    out.kind = kind;
    out.config = cfg;
    out.probe_label = probe_is_x ? "Xp" : "Pp";
    out.conj_label = conj_is_x ? "Xc" : "Pc";
    auto qp = quantize(probe, cfg.digitizer_bits, cfg.fullscale);
    auto qc = quantize(conj, cfg.digitizer_bits, cfg.fullscale);
    out.probe_codes = std::move(qp.codes);
    out.conj_codes = std::move(qc.codes);
    out.quant_step = qp.step;
    out.clip_fraction_probe = qp.clip_fraction;
    out.clip_fraction_conj = qc.clip_fraction;
    return out;
}

TraceSet synth_traces(const SynthConfig& config) {
    return synthesize(config, true, true, TraceKind::Signal);
}

TraceSet eom_off_traces(const SynthConfig& config) {
    return synthesize(config, true, false, TraceKind::SignalOff);
}

TraceSet shot_traces(const SynthConfig& config) {
    SynthConfig c = config;
    c.profile = SqueezeProfile::flat(c.layout, 0.0);
    return synthesize(c, true, false, TraceKind::Shot);
}

TraceSet elec_traces(const SynthConfig& config) {
    return synthesize(config, false, false, TraceKind::Elec);
}

QuantizeResult quantize(const std::vector<double>& trace, int bits, double fullscale) {
    require(bits >= 2 && bits <= 16, "digitizer bits must be in [2, 16]");
    require(fullscale > 0, "fullscale must be positive");
    QuantizeResult out;
    out.step = fullscale / (1 << (bits - 1));
    int lo = -(1 << (bits - 1)), hi = (1 << (bits - 1)) - 1;
    out.codes.resize(trace.size());
    size_t clipped = 0;
    for (size_t i = 0; i < trace.size(); ++i) {
        long code = std::lround(trace[i] / out.step);
        if (code < lo || code > hi) {
            ++clipped;
            code = std::clamp(code, static_cast<long>(lo), static_cast<long>(hi));
        }
        out.codes[i] = static_cast<int16_t>(code);
    }
    out.clip_fraction = trace.empty() ? 0.0 : static_cast<double>(clipped) / trace.size();
    return out;
}

std::vector<double> TraceSet::probe() const {
    std::vector<double> v(probe_codes.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = probe_codes[i] * quant_step;
    return v;
}

std::vector<double> TraceSet::conjugate() const {
    std::vector<double> v(conj_codes.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = conj_codes[i] * quant_step;
    return v;
}

}  // namespace cvl
