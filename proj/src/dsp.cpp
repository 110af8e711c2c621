#include "cvl/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "cvl/fft.hpp"

namespace cvl {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

long grid_index(double f_hz, double window_s) {
    double x = f_hz * window_s;
    long i = std::lround(x);
    require(std::abs(x - i) < 1e-6, "frequency does not sit on the FFT grid");
    return i;
}
}  // namespace

BinnedSignal bin_filter(const Spectrum& spectrum, long n_samples, double dt,
                        const ModeLayout& layout) {
    layout.validate();
    double window = n_samples * dt;
    long half = n_samples / 2;
    int h = static_cast<int>(std::floor(layout.bin_width_hz / 2 * window + 1e-9));
    require(h >= 1, "window too short to resolve the bin width");

    BinnedSignal out;
    out.half_width = h;
    out.n_samples = n_samples;
    out.window_s = window;
    out.scale = 2.0 / (static_cast<double>(n_samples) * n_samples);
    for (int b = layout.interior_begin(); b < layout.interior_end(); ++b) {
        double c = layout.center_hz(b);
        long ci = grid_index(c, window);
        require(ci - h > 0, "bin extends to or below DC");
        require(ci + h < half, "bin extends to or above Nyquist");
        out.centers_hz.push_back(c);
    }
    out.band.resize(2 * h + 1, out.bins());
    for (int b = 0; b < out.bins(); ++b) {
        long ci = grid_index(out.centers_hz[b], window);
        for (int s = -h; s <= h; ++s) out.band(s + h, b) = spectrum[ci + s];
    }
    return out;
}

BinnedSignal bin_filter(const std::vector<double>& trace, double dt, const ModeLayout& layout) {
    return bin_filter(fft_real(trace), static_cast<long>(trace.size()), dt, layout);
}

long whole_period_prefix(long n, double dt, const ModeLayout& layout, const DriveSpec& drive) {
    auto aligned = [&](long len) {
        double window = len * dt;
        for (double f : {layout.spacing_hz, layout.start_center_hz}) {
            double x = f * window;
            if (std::abs(x - std::round(x)) > 1e-9) return false;
        }
        for (const auto& t : drive.tones) {
            double x = t.frequency_hz * window;
            if (std::abs(x - std::round(x)) > 1e-9) return false;
        }
        return true;
    };
    for (long len = n; len > n / 2; --len)
        if (aligned(len)) return len;
    require(false, "no whole-period window found within half the trace");
    return 0;
}

std::vector<double> masked_real_series(const Spectrum& spectrum, long n_samples, double dt,
                                       const ModeLayout& layout, int interior_bin) {
    double window = n_samples * dt;
    int h = static_cast<int>(std::floor(layout.bin_width_hz / 2 * window + 1e-9));
    long ci = grid_index(layout.center_hz(layout.interior_begin() + interior_bin), window);
    Spectrum masked(n_samples / 2 + 1, {0.0, 0.0});
    for (long j = ci - h; j <= ci + h; ++j) masked[j] = spectrum[j];
    return ifft_real(masked, static_cast<int>(n_samples));
}

Eigen::MatrixXd quad_covariance(const BinnedSignal& a, const BinnedSignal& b, int band_limit) {
    require(a.half_width == b.half_width && a.n_samples == b.n_samples,
            "quad_covariance: signals from different windows");
    int na = a.bins(), nb = b.bins();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(na, nb);
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
            if (band_limit >= 0 && std::abs(i - j) > band_limit) continue;
            q(i, j) = a.scale * a.band.col(i).dot(b.band.col(j)).real();
        }
    }
    return q;
}

LockinResult lockin_xp(const BinnedSignal& a, int bin_a, const BinnedSignal& b, int bin_b,
                       double tone_hz) {
    require(bin_a >= 0 && bin_a < a.bins() && bin_b >= 0 && bin_b < b.bins(),
            "lockin_xp: bin out of range");
    double df = std::abs(a.centers_hz[bin_a] - b.centers_hz[bin_b]);
    require(std::abs(df - tone_hz) * a.window_s < 1e-6,
            "lockin_xp: bin separation does not match the drive frequency");
    std::complex<double> z = a.band.col(bin_a).dot(b.band.col(bin_b));
    // dot() conjugates the left argument; we want sum a * conj(b)
    z = std::conj(z);
    LockinResult out;
    out.amplitude = a.scale * std::abs(z);
    out.phase = std::arg(z);
    return out;
}

Spectrum apply_delay(const Spectrum& spectrum, long n_samples, double dt, double delay_s) {
    Spectrum out(spectrum);
    double window = n_samples * dt;
    for (size_t j = 0; j < out.size(); ++j)
        out[j] *= std::polar(1.0, -kTwoPi * (j / window) * delay_s);
    return out;
}

std::optional<double> estimate_delay(const Spectrum& probe, const Spectrum& conj, long n_samples,
                                     double dt, const ModeLayout& layout, QuadConfig quad,
                                     double search_range_s, double step_s) {
    require(quad != QuadConfig::XP, "delay estimation needs an EPR-correlated (XX or PP) run");
    double window = n_samples * dt;
    int h = static_cast<int>(std::floor(layout.bin_width_hz / 2 * window + 1e-9));
    // cross spectrum over all masked coefficients
    std::vector<std::complex<double>> w;
    std::vector<double> freq;
    for (int b = layout.interior_begin(); b < layout.interior_end(); ++b) {
        long ci = grid_index(layout.center_hz(b), window);
        for (long j = ci - h; j <= ci + h; ++j) {
            w.push_back(probe[j] * std::conj(conj[j]));
            freq.push_back(j / window);
        }
    }
    double sign = (quad == QuadConfig::XX) ? +1.0 : -1.0;
    auto correlation = [&](double tau) {
        std::complex<double> acc(0, 0);
        for (size_t i = 0; i < w.size(); ++i) acc += w[i] * std::polar(1.0, -kTwoPi * freq[i] * tau);
        return sign * acc.real();
    };
    double best_tau = 0, best = -1e300;
    for (double tau = -search_range_s; tau <= search_range_s + step_s / 2; tau += step_s) {
        double c = correlation(tau);
        if (c > best) {
            best = c;
            best_tau = tau;
        }
    }
    // significance: a correlation-free pair gives Re ~ N(0, sum|w|^2 / 2)
    double noise = 0;
    for (const auto& wi : w) noise += std::norm(wi);
    if (best < 5.0 * std::sqrt(noise / 2.0)) return std::nullopt;
    // parabolic refinement around the grid optimum
    double c0 = correlation(best_tau - step_s), c1 = best, c2 = correlation(best_tau + step_s);
    double denom = c0 - 2 * c1 + c2;
    if (std::abs(denom) > 0)
        best_tau += step_s * 0.5 * (c0 - c2) / denom;
    return best_tau;
}

CovarianceEstimate assemble_covariance(const std::vector<RunData>& runs, int band_limit) {
    require(!runs.empty(), "assemble_covariance: no runs");
    int m = runs.front().probe.bins();
    for (const auto& r : runs)
        require(r.probe.bins() == m && r.conj.bins() == m,
                "assemble_covariance: inconsistent bin counts across runs");
    CovarianceEstimate est;
    est.bins = m;
    est.sigma = Eigen::MatrixXd::Zero(4 * m, 4 * m);
    est.norm = Normalization::Absolute;
    int counts[4][4] = {};
    auto block = [&](Sector a, Sector b) { return est.sigma.block(a * m, b * m, m, m); };

    for (const auto& run : runs) {
        ++est.run_count;
        if (run.quad == QuadConfig::XX) {
            block(kXp, kXp) += quad_covariance(run.probe, run.probe, band_limit);
            block(kXc, kXc) += quad_covariance(run.conj, run.conj, band_limit);
            Eigen::MatrixXd c = quad_covariance(run.probe, run.conj, band_limit);
            block(kXp, kXc) += c;
            block(kXc, kXp) += c.transpose();
            ++counts[kXp][kXp], ++counts[kXc][kXc], ++counts[kXp][kXc], ++counts[kXc][kXp];
        } else if (run.quad == QuadConfig::PP) {
            block(kPp, kPp) += quad_covariance(run.probe, run.probe, band_limit);
            block(kPc, kPc) += quad_covariance(run.conj, run.conj, band_limit);
            Eigen::MatrixXd c = quad_covariance(run.probe, run.conj, band_limit);
            block(kPp, kPc) += c;
            block(kPc, kPp) += c.transpose();
            ++counts[kPp][kPp], ++counts[kPc][kPc], ++counts[kPp][kPc], ++counts[kPc][kPp];
        } else {
            // probe locked to X, conjugate to P; duplicated into the PX quadrant
            Eigen::MatrixXd c = quad_covariance(run.probe, run.conj, -1);
            block(kXp, kPc) += c;
            block(kPc, kXp) += c.transpose();
            ++counts[kXp][kPc], ++counts[kPc][kXp];
        }
    }
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            if (counts[a][b] > 0) {
                est.sigma.block(a * m, b * m, m, m) /= counts[a][b];
                est.measured[a][b] = true;
            }
        }
    }
    return est;
}

namespace {
// per-sector-diagonal vectors of a covariance estimate
Eigen::VectorXd sector_diag(const CovarianceEstimate& e, Sector s) {
    return e.sigma.block(s * e.bins, s * e.bins, e.bins, e.bins).diagonal();
}
}  // namespace

CovarianceEstimate normalize(const CovarianceEstimate& sigma, const CovarianceEstimate& shot,
                             const CovarianceEstimate* elec, NormalizeMode mode) {
    require(sigma.bins == shot.bins, "normalize: layout mismatch");
    require(elec == nullptr || elec->bins == sigma.bins, "normalize: elec layout mismatch");
    require(mode == NormalizeMode::ShotRatio || elec != nullptr,
            "elec-subtract normalization needs an electronic-noise estimate");
    int m = sigma.bins;
    // vacuum shot reference is quadrature-symmetric: X and P sectors share the
    // per-beam shot variances
    Eigen::VectorXd shot_p = shot.measured[kXp][kXp] ? sector_diag(shot, kXp) : sector_diag(shot, kPp);
    Eigen::VectorXd shot_c = shot.measured[kXc][kXc] ? sector_diag(shot, kXc) : sector_diag(shot, kPc);
    Eigen::VectorXd elec_p = Eigen::VectorXd::Zero(m), elec_c = Eigen::VectorXd::Zero(m);
    if (elec != nullptr) {
        elec_p = elec->measured[kXp][kXp] ? sector_diag(*elec, kXp) : sector_diag(*elec, kPp);
        elec_c = elec->measured[kXc][kXc] ? sector_diag(*elec, kXc) : sector_diag(*elec, kPc);
    }

    CovarianceEstimate out = sigma;
    out.norm = Normalization::ShotNormalized;
    Eigen::VectorXd ref_p = shot_p, ref_c = shot_c;
    if (mode == NormalizeMode::ElecSubtract) {
        ref_p -= elec_p;
        ref_c -= elec_c;
    }
    for (int i = 0; i < m; ++i) {
        require(ref_p(i) > 0 && ref_c(i) > 0, "normalize: nonpositive shot reference");
    }
    auto beam_of = [](Sector s) { return (s == kXp || s == kPp) ? 0 : 1; };
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            if (!sigma.measured[a][b]) continue;
            auto blk = out.sigma.block(a * m, b * m, m, m);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < m; ++j) {
                    double v = blk(i, j);
                    if (mode == NormalizeMode::ElecSubtract && a == b && i == j)
                        v -= (beam_of(static_cast<Sector>(a)) == 0 ? elec_p(i) : elec_c(i));
                    double rp = beam_of(static_cast<Sector>(a)) == 0 ? ref_p(i) : ref_c(i);
                    double rc = beam_of(static_cast<Sector>(b)) == 0 ? ref_p(j) : ref_c(j);
                    blk(i, j) = v / std::sqrt(rp * rc);
                }
            }
        }
    }
    return out;
}

SqueezingSpectrum squeezing_spectrum(const RunData& run, const RunData& shot,
                                     const RunData* elec, NormalizeMode mode) {
    require(run.quad != QuadConfig::XP, "squeezing spectrum needs an XX or PP run");
    int m = run.probe.bins();
    Eigen::VectorXd vp = quad_covariance(run.probe, run.probe, 0).diagonal();
    Eigen::VectorXd vc = quad_covariance(run.conj, run.conj, 0).diagonal();
    Eigen::VectorXd cx = quad_covariance(run.probe, run.conj, 0).diagonal();
    Eigen::VectorXd sp = quad_covariance(shot.probe, shot.probe, 0).diagonal();
    Eigen::VectorXd sc = quad_covariance(shot.conj, shot.conj, 0).diagonal();
    Eigen::VectorXd ep = Eigen::VectorXd::Zero(m), ec = Eigen::VectorXd::Zero(m);
    if (mode == NormalizeMode::ElecSubtract) {
        require(elec != nullptr, "elec-subtract needs an electronic-noise run");
        ep = quad_covariance(elec->probe, elec->probe, 0).diagonal();
        ec = quad_covariance(elec->conj, elec->conj, 0).diagonal();
    }
    double sign = (run.quad == QuadConfig::XX) ? -1.0 : +1.0;  // Xp - Xc vs Pp + Pc
    SqueezingSpectrum out;
    out.quad = run.quad;
    out.centers_hz = run.probe.centers_hz;
    out.epr_db.resize(m);
    for (int i = 0; i < m; ++i) {
        double num = (vp(i) - ep(i)) + (vc(i) - ec(i)) + 2 * sign * cx(i);
        double den = (sp(i) - ep(i)) + (sc(i) - ec(i));
        require(den > 0, "squeezing_spectrum: nonpositive shot reference");
        out.epr_db[i] = 10.0 * std::log10(num / den);
    }
    return out;
}

}  // namespace cvl
