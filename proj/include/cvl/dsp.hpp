// Analysis pipeline: FFT masking into frequency bins, demodulation to a
// common baseband grid, delay estimation/compensation, whole-period
// covariance estimation, software lock-in XP extraction, covariance assembly
// across runs, and shot/electronic-noise normalization.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

#include "cvl/gaussian.hpp"
#include "cvl/layout.hpp"
#include "cvl/synth.hpp"

namespace cvl {

using Spectrum = std::vector<std::complex<double>>;

// Masked spectra of the interior bins, aligned on a common baseband
// coefficient grid (common demodulation frequency). Column b holds the
// coefficients of bin b at baseband offsets s in [-h, +h].
struct BinnedSignal {
    Eigen::MatrixXcd band;          // (2h+1) x nbins
    std::vector<double> centers_hz;
    int half_width = 0;             // h, coefficients per side
    long n_samples = 0;
    double window_s = 0.0;
    double scale = 0.0;             // 2/n^2: coefficient sums -> time-domain covariance

    int bins() const { return static_cast<int>(centers_hz.size()); }
};

BinnedSignal bin_filter(const Spectrum& spectrum, long n_samples, double dt,
                        const ModeLayout& layout);
BinnedSignal bin_filter(const std::vector<double>& trace, double dt, const ModeLayout& layout);

// Largest prefix length <= n whose window covers a whole number of periods of
// every drive tone and aligns the bin grid with the transform resolution.
// Trims at most one alignment period from the tail.
long whole_period_prefix(long n, double dt, const ModeLayout& layout, const DriveSpec& drive);

// Real time series of one masked bin (mask, mirror, inverse transform),
// without demodulation. This is the literal per-bin filter output; it is the
// reference implementation the coefficient-domain estimators must agree with.
std::vector<double> masked_real_series(const Spectrum& spectrum, long n_samples, double dt,
                                       const ModeLayout& layout, int interior_bin);

// Covariance between the demodulated real bin series of two signals:
// cov(a_i, b_j) = scale * Re sum_s A_i(s) conj(B_j(s)).
Eigen::MatrixXd quad_covariance(const BinnedSignal& a, const BinnedSignal& b,
                                int band_limit = -1);

struct LockinResult {
    double amplitude = 0.0;  // covariance units
    double phase = 0.0;      // radians; in-phase component = amplitude * cos(phase)
};
// Software lock-in between bin i of a and bin j of b against the drive at
// tone_hz = |f_i - f_j|. Equals the whole-period average of
// a_i(t) * b_j(t) * {cos, sin}(2 pi tone t) up to the common normalization.
LockinResult lockin_xp(const BinnedSignal& a, int bin_a, const BinnedSignal& b, int bin_b,
                       double tone_hz);

// Broadband EPR-correlation delay scan: returns the delay that minimizes the
// summed two-mode-squeezing variance across bins, or nullopt if the objective
// has no significant peak. `quad` selects the correlated combination
// (XX: difference, PP: sum).
std::optional<double> estimate_delay(const Spectrum& probe, const Spectrum& conj, long n_samples,
                                     double dt, const ModeLayout& layout, QuadConfig quad,
                                     double search_range_s = 50e-9, double step_s = 0.2e-9);

// advance (delay_s < 0) or retard the spectrum by a phase ramp
Spectrum apply_delay(const Spectrum& spectrum, long n_samples, double dt, double delay_s);

struct RunData {
    QuadConfig quad = QuadConfig::XX;
    TraceKind kind = TraceKind::Signal;
    BinnedSignal probe;
    BinnedSignal conj;
};

// block sectors of the (Xp, Xc, Pp, Pc) ordering
enum Sector { kXp = 0, kXc = 1, kPp = 2, kPc = 3 };

struct CovarianceEstimate {
    Eigen::MatrixXd sigma;  // 4M x 4M over interior modes
    bool measured[4][4] = {};
    int run_count = 0;
    Normalization norm = Normalization::Absolute;
    int bins = 0;

    CovarianceMatrix as_covariance() const { return {sigma, norm}; }
};

// Average the per-run covariance sectors: XX fills XpXp/XcXc/XpXc, PP the P
// blocks, XP fills XpPc (duplicated into the PX quadrant). Same-beam XP
// blocks stay zero with their mask cleared.
CovarianceEstimate assemble_covariance(const std::vector<RunData>& runs, int band_limit = -1);

enum class NormalizeMode { ShotRatio, ElecSubtract };

// Per-bin, per-beam shot variances from a shot estimate (X and P sectors share
// the vacuum reference). ElecSubtract removes the electronic-noise diagonal
// from both signal and shot before taking the ratio.
CovarianceEstimate normalize(const CovarianceEstimate& sigma, const CovarianceEstimate& shot,
                             const CovarianceEstimate* elec, NormalizeMode mode);

struct SqueezingSpectrum {
    std::vector<double> centers_hz;
    std::vector<double> epr_db;  // var(Xp - Xc) or var(Pp + Pc), shot-normalized
    QuadConfig quad = QuadConfig::XX;
};

SqueezingSpectrum squeezing_spectrum(const RunData& run, const RunData& shot,
                                     const RunData* elec, NormalizeMode mode);

}  // namespace cvl
