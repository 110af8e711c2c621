#include "cvl/gaussian.hpp"

#include <cmath>

#include "cvl/bessel.hpp"

namespace cvl {

CovarianceMatrix vacuum_covariance(const ModeLayout& layout) {
    layout.validate();
    int d = 4 * layout.total_bins();
    return {0.5 * Eigen::MatrixXd::Identity(d, d), Normalization::Absolute};
}

SymplecticMatrix tms_symplectic(const ModeLayout& layout, const SqueezeProfile& profile) {
    layout.validate();
    profile.validate(layout);
    QuadIndex q(layout);
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(q.dim(), q.dim());
    for (int i = 0; i < q.n; ++i) {
        double c = std::cosh(2 * profile.r_of_bin[i]);
        double s = std::sinh(2 * profile.r_of_bin[i]);
        S(q.xp(i), q.xp(i)) = c;
        S(q.xp(i), q.xc(i)) = s;
        S(q.xc(i), q.xp(i)) = s;
        S(q.xc(i), q.xc(i)) = c;
        S(q.pp(i), q.pp(i)) = c;
        S(q.pp(i), q.pc(i)) = -s;
        S(q.pc(i), q.pp(i)) = -s;
        S(q.pc(i), q.pc(i)) = c;
    }
    return {std::move(S)};
}

namespace {

// j1_sign = +1 builds the forward modulator, -1 the phase-advanced unmixing factor
SymplecticMatrix eom_single_impl(const ModeLayout& layout, const DriveTone& tone,
                                 Beam beam, double j1_sign) {
    layout.validate();
    require(tone.phase_rad == 0.0,
            "analytic engine requires zero drive phase; nonzero phases are a synthesis/DSP concern");
    int k = tone.offset(layout);
    int n = layout.total_bins();
    require(k <= n - 1, "tone offset exceeds the simulated band; add guard modes");
    QuadIndex q(layout);
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(q.dim(), q.dim());
    if (tone.mod_index == 0.0) return {std::move(S)};

    double j0 = bessel_j(0, tone.mod_index);
    double j1 = j1_sign * bessel_j(1, tone.mod_index);
    auto modulate = [&](bool probe) {
        auto x = [&](int i) { return probe ? q.xp(i) : q.xc(i); };
        auto p = [&](int i) { return probe ? q.pp(i) : q.pc(i); };
        for (int i = 0; i < n; ++i) {
            S(x(i), x(i)) = j0;
            S(p(i), p(i)) = j0;
            for (int j : {i - k, i + k}) {
                if (j < 0 || j >= n) continue;
                S(x(i), p(j)) = j1;   // B block
                S(p(i), x(j)) = -j1;  // -B block
            }
        }
    };
    if (beam == Beam::Probe || beam == Beam::BothHalved) modulate(true);
    if (beam == Beam::Conjugate || beam == Beam::BothHalved) modulate(false);
    return {std::move(S)};
}

DriveTone halved(const DriveTone& t) {
    DriveTone h = t;
    h.mod_index = t.mod_index / 2;
    return h;
}

}  // namespace

SymplecticMatrix eom_symplectic_single(const ModeLayout& layout, const DriveTone& tone,
                                       Beam beam) {
    if (beam == Beam::BothHalved)
        return eom_single_impl(layout, halved(tone), Beam::BothHalved, +1.0);
    return eom_single_impl(layout, tone, beam, +1.0);
}

SymplecticMatrix eom_symplectic(const ModeLayout& layout, const DriveSpec& drive) {
    drive.validate(layout);
    int d = 4 * layout.total_bins();
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(d, d);
    for (const auto& tone : drive.tones)
        S = (eom_symplectic_single(layout, tone, drive.target_beam).m * S).eval();
    return {std::move(S)};
}

SymplecticMatrix eom_unmix(const ModeLayout& layout, const DriveSpec& drive) {
    drive.validate(layout);
    int d = 4 * layout.total_bins();
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(d, d);
    for (auto it = drive.tones.rbegin(); it != drive.tones.rend(); ++it) {
        DriveTone t = (drive.target_beam == Beam::BothHalved) ? halved(*it) : *it;
        S = (eom_single_impl(layout, t, drive.target_beam, -1.0).m * S).eval();
    }
    return {std::move(S)};
}

CovarianceMatrix apply(const SymplecticMatrix& s, const CovarianceMatrix& sigma) {
    require(s.m.rows() == sigma.m.rows(), "apply: dimension mismatch");
    Eigen::MatrixXd out = s.m * sigma.m * s.m.transpose();
    out = 0.5 * (out + out.transpose()).eval();
    return {std::move(out), sigma.norm};
}

Eigen::MatrixXd symplectic_form(int bins) {
    int h = 2 * bins;
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * h, 2 * h);
    omega.topRightCorner(h, h) = Eigen::MatrixXd::Identity(h, h);
    omega.bottomLeftCorner(h, h) = -Eigen::MatrixXd::Identity(h, h);
    return omega;
}

double symplectic_defect(const SymplecticMatrix& s) {
    require(s.m.rows() == s.m.cols() && s.m.rows() % 4 == 0, "defect: square 4N matrix expected");
    Eigen::MatrixXd omega = symplectic_form(static_cast<int>(s.m.rows()) / 4);
    return (s.m * omega * s.m.transpose() - omega).cwiseAbs().maxCoeff();
}

CovarianceMatrix theory_covariance(const ModeLayout& layout, const SqueezeProfile& profile,
                                   const DriveSpec& drive) {
    CovarianceMatrix sigma = apply(tms_symplectic(layout, profile), vacuum_covariance(layout));
    if (!drive.empty()) sigma = apply(eom_symplectic(layout, drive), sigma);
    return sigma;
}

CovarianceMatrix shot_normalize(const CovarianceMatrix& sigma) {
    require(sigma.norm == Normalization::Absolute, "covariance already shot-normalized");
    return {2.0 * sigma.m, Normalization::ShotNormalized};
}

}  // namespace cvl
