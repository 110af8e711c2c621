// Exact Gaussian-state engine: symplectic matrices for two-mode squeezing and
// multi-tone phase modulation, chained into covariance matrices.
//
// All matrices are 4N x 4N over the (Xp, Xc, Pp, Pc) block ordering with
// N = interior + guard bins. Vacuum quadrature variance is 1/2.
#pragma once

#include <Eigen/Dense>

#include "cvl/layout.hpp"

namespace cvl {

enum class Normalization { Absolute, ShotNormalized };

struct SymplecticMatrix {
    Eigen::MatrixXd m;
};

struct CovarianceMatrix {
    Eigen::MatrixXd m;
    Normalization norm = Normalization::Absolute;
};

// (1/2) * Identity of size 4N
CovarianceMatrix vacuum_covariance(const ModeLayout& layout);

// Per-bin two-mode squeezing: couples (Xp_i, Xc_i) with cosh(2r_i), sinh(2r_i)
// and (Pp_i, Pc_i) with cosh(2r_i), -sinh(2r_i). Exactly symplectic.
SymplecticMatrix tms_symplectic(const ModeLayout& layout, const SqueezeProfile& profile);

// Single-tone phase modulator, first sidebands only. Within the modulated
// beam: X/P diagonals J0(m); X<-P coupling +J1(m) at bins offset by k and
// P<-X coupling -J1(m) (block form [[A, B], [-B, A]]). The unmodulated beam
// is untouched. Requires tone.phase == 0.
SymplecticMatrix eom_symplectic_single(const ModeLayout& layout, const DriveTone& tone,
                                       Beam beam);

// Ordered product over tones (ascending frequency; later tones multiply from
// the left). Beam::BothHalved applies index m/2 to each beam per tone.
SymplecticMatrix eom_symplectic(const ModeLayout& layout, const DriveSpec& drive);

// First-order structural unmixing chain: the product, in reverse tone order,
// of single-tone factors with the sign of J1 flipped (modulation with the
// drive phase advanced by pi). Agrees with the true inverse to O(J1^2); its
// rows carry pure J0/J1 weights, which is what the direct covariance-term
// expansion of the nullifiers assumes.
SymplecticMatrix eom_unmix(const ModeLayout& layout, const DriveSpec& drive);

// S * Sigma * S^T, symmetrized
CovarianceMatrix apply(const SymplecticMatrix& s, const CovarianceMatrix& sigma);

// || S Omega S^T - Omega ||_max with Omega = [[0, I], [-I, 0]] over (X..., P...)
double symplectic_defect(const SymplecticMatrix& s);

Eigen::MatrixXd symplectic_form(int bins);

// Full analytic chain: (1/2) S_eom S_tms S_tms^T S_eom^T
CovarianceMatrix theory_covariance(const ModeLayout& layout, const SqueezeProfile& profile,
                                   const DriveSpec& drive);

// Entrywise rescale by per-mode shot variances (geometric mean for cross
// terms). For the analytic engine shot variance is 1/2 per quadrature, so
// this is multiplication by 2.
CovarianceMatrix shot_normalize(const CovarianceMatrix& sigma);

}  // namespace cvl
