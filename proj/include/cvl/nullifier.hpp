// Nullifier entanglement witnesses: EPR nullifier rows, their transform under
// the modulator, per-mode variances by the matrix path and by the direct
// covariance-term expansion, and the error matrix U = 2 cov[P - VX].
#pragma once

#include <Eigen/Dense>

#include "cvl/gaussian.hpp"
#include "cvl/layout.hpp"

namespace cvl {

enum class Quadrature { X, P };
enum class NullifierMethod { Matrix, Lockin };

// 2N x 4N: X-nullifier rows (Xp_i - Xc_i) then P-nullifier rows (Pp_i + Pc_i).
struct NullifierMatrix {
    Eigen::MatrixXd rows;
    int bins = 0;
    int x_row(int bin) const { return bin; }
    int p_row(int bin) const { return bins + bin; }
};

NullifierMatrix epr_nullifier_matrix(const ModeLayout& layout);

// N' = N * S^{-1} with the true matrix inverse. Throws if S is singular.
NullifierMatrix transform_nullifiers(const NullifierMatrix& n, const SymplecticMatrix& s_eom);

// N' = N * eom_unmix(drive): the first-order unmixing whose rows carry pure
// J0/J1 weights (the convention the direct expansion of the variances uses).
NullifierMatrix transform_nullifiers(const NullifierMatrix& n, const ModeLayout& layout,
                                     const DriveSpec& drive);

// [N_row] Sigma [N_row]^T
double nullifier_variance(const NullifierMatrix& n, int row, const CovarianceMatrix& sigma);

// Explicit covariance-term sum for a single tone: the EPR variance with the
// modulated-beam quadratures replaced by their J0/J1 sideband expansions.
// Requires an interior mode whose +-k neighbours are in range.
double direct_expansion_variance(const CovarianceMatrix& sigma, const ModeLayout& layout,
                                 int mode, const DriveTone& tone, Quadrature quad,
                                 Beam beam = Beam::Conjugate);

struct NullifierReport {
    struct Entry {
        int mode = 0;             // interior index, 1-based
        double center_hz = 0.0;
        double epr_x_db = 0.0;    // untransformed EPR rows on the same state
        double epr_p_db = 0.0;
        double null_x_db = 0.0;   // transformed nullifier rows
        double null_p_db = 0.0;
        bool edge = false;        // row touches guard/out-of-range bins
    };
    std::vector<Entry> entries;
    NullifierMethod method = NullifierMethod::Matrix;
    int run_count = 1;
    double window_s = 0.0;
};

// Shot-normalized report over interior modes: 10*log10(var(N, Sigma) /
// var(N, Sigma_shot)) with the same row used on both covariances. Modes whose
// sideband span (max_offset bins each way) leaves the interior are edge-flagged.
NullifierReport nullifier_report(const CovarianceMatrix& sigma, const CovarianceMatrix& shot,
                                 const NullifierMatrix& epr, const NullifierMatrix& transformed,
                                 const ModeLayout& layout, int max_offset = 0);

// Rows over the measured interior-mode space (4M). Rows are built on a
// virtually guard-extended layout and projected onto the measured bins;
// entries that fall outside are dropped and the mode flagged as edge.
struct MeasurementNullifiers {
    NullifierMatrix epr;
    NullifierMatrix transformed;
    std::vector<bool> edge;  // per interior mode
};
MeasurementNullifiers measurement_nullifiers(const ModeLayout& layout, const DriveSpec& drive);

struct ErrorMatrix {
    Eigen::MatrixXd u;             // 2N x 2N, symmetric
    Eigen::VectorXd error_vector;  // diag(u)
};

// U = 2 cov[P - VX] = 2 (Sigma_PP - V Sigma_XP - Sigma_PX V^T + V Sigma_XX V^T)
ErrorMatrix error_matrix(const CovarianceMatrix& sigma, const Eigen::MatrixXd& v);

}  // namespace cvl
