#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "cvl/bessel.hpp"
#include "cvl/gaussian.hpp"

using namespace cvl;

namespace {

ModeLayout layout_n(int m, int g = 0) {
    return {m, 200e3, 180e3, 200e3, g};
}

const double kIndex18 = 30.0 * M_PI / 520.0;  // the 30 V drive, quoted as 0.18
const double kIndex36 = 60.0 * M_PI / 520.0;

// oracle: explicit 4x4 arithmetic for a single two-mode-squeezed pair
struct TmsPair {
    double c, s;
    explicit TmsPair(double r) : c(std::cosh(2 * r)), s(std::sinh(2 * r)) {}
    double var_x_diff() const {  // var(Xp - Xc) on (1/2) S S^T
        double xpxp = 0.5 * (c * c + s * s), xpxc = 0.5 * (2 * c * s);
        return 2 * xpxp - 2 * xpxc;
    }
    double xpxc() const { return 0.5 * 2 * c * s; }
};

}  // namespace

TEST_CASE("vacuum covariance is the half identity") {
    auto v1 = vacuum_covariance(layout_n(2));
    CHECK(v1.m.rows() == 8);
    CHECK((v1.m - 0.5 * Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);

    auto v2 = vacuum_covariance(layout_n(3, 1));
    CHECK(v2.m.rows() == 20);
    CHECK(v2.m(0, 0) == 0.5);

    // EPR combination sits at shot level 1.0
    QuadIndex q(layout_n(3, 1));
    double epr = v2.m(q.xp(0), q.xp(0)) + v2.m(q.xc(0), q.xc(0)) - 2 * v2.m(q.xp(0), q.xc(0));
    CHECK(epr == 1.0);
}

TEST_CASE("two-mode squeezing matches the pair oracle") {
    ModeLayout l = layout_n(2);
    QuadIndex q(l);

    SUBCASE("zero squeezing gives the identity") {
        auto s = tms_symplectic(l, SqueezeProfile::flat(l, 0.0));
        CHECK((s.m - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("r = 0.25 EPR variance") {
        auto s = tms_symplectic(l, SqueezeProfile::flat(l, 0.25));
        auto sig = apply(s, vacuum_covariance(l));
        double var = sig.m(q.xp(0), q.xp(0)) + sig.m(q.xc(0), q.xc(0)) -
                     2 * sig.m(q.xp(0), q.xc(0));
        CHECK(var == doctest::Approx(TmsPair(0.25).var_x_diff()).epsilon(1e-14));
        CHECK(var == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
        // off-diagonal anchor: sinh(1)/2
        CHECK(sig.m(q.xp(0), q.xc(0)) ==
              doctest::Approx(0.5876005968219007).epsilon(1e-14));
        CHECK(sig.m(q.xp(0), q.xc(0)) == doctest::Approx(TmsPair(0.25).xpxc()).epsilon(1e-14));
    }

    SUBCASE("r chosen for -3.01 dB") {
        double r = SqueezeProfile::r_from_epr(0.5);
        auto s = tms_symplectic(l, SqueezeProfile::flat(l, r));
        auto sig = apply(s, vacuum_covariance(l));
        double var = sig.m(q.xp(1), q.xp(1)) + sig.m(q.xc(1), q.xc(1)) -
                     2 * sig.m(q.xp(1), q.xc(1));
        CHECK(10 * std::log10(var) == doctest::Approx(-3.0103).epsilon(1e-4));
        double varp = sig.m(q.pp(1), q.pp(1)) + sig.m(q.pc(1), q.pc(1)) +
                      2 * sig.m(q.pp(1), q.pc(1));
        CHECK(varp == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("profile length mismatch is rejected") {
        SqueezeProfile p;
        p.r_of_bin = {0.1};
        CHECK_THROWS(tms_symplectic(l, p));
    }
}

TEST_CASE("TMS is exactly symplectic for r up to 2") {
    ModeLayout l = layout_n(4, 1);
    for (double r : {0.0, 0.3, 1.0, 2.0}) {
        auto s = tms_symplectic(l, SqueezeProfile::flat(l, r));
        CHECK(symplectic_defect(s) < 1e-12);
    }
}

TEST_CASE("single-tone modulator matrix structure") {
    ModeLayout l = layout_n(8, 1);
    QuadIndex q(l);

    SUBCASE("zero index gives the identity") {
        auto s = eom_symplectic_single(l, {200e3, 0.0, 0.0}, Beam::Conjugate);
        CHECK((s.m - Eigen::MatrixXd::Identity(q.dim(), q.dim())).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("figure anchor: diagonal 0.967, couplings +-0.178 at the 60 V index") {
        auto s = eom_symplectic_single(l, {200e3, kIndex36, 0.0}, Beam::Conjugate);
        CHECK(std::abs(s.m(q.xc(4), q.xc(4)) - 0.967) < 5e-4);
        CHECK(std::abs(s.m(q.xc(4), q.pc(5)) - 0.178) < 5e-4);
        CHECK(std::abs(s.m(q.xc(4), q.pc(3)) - 0.178) < 5e-4);
        CHECK(std::abs(s.m(q.pc(4), q.xc(5)) + 0.178) < 5e-4);
        // probe untouched
        CHECK(s.m(q.xp(4), q.xp(4)) == 1.0);
        CHECK(s.m(q.xp(4), q.pp(5)) == 0.0);
    }

    SUBCASE("nonzero phase and out-of-range offsets are rejected") {
        CHECK_THROWS(eom_symplectic_single(l, {200e3, 0.1, 0.3}, Beam::Conjugate));
        CHECK_THROWS(eom_symplectic_single(l, {200e3 * 11, 0.1, 0.0}, Beam::Conjugate));
        CHECK_THROWS(eom_symplectic_single(l, {150e3, 0.1, 0.0}, Beam::Conjugate));
    }
}

TEST_CASE("symplectic defect of the first-sideband modulator") {
    // Bessel-completeness oracle: the largest entry of S Omega S^T - Omega is
    // the edge-row deficiency 1 - J0^2 - J1^2 (= J1^2 + 2 J2^2 + ...), and the
    // interior off-diagonal entries are J1^2. The truncation error is second
    // order in the coupling, not fourth.
    ModeLayout l = layout_n(8, 0);
    CHECK(symplectic_defect({Eigen::MatrixXd::Identity(32, 32)}) == 0.0);
    for (double m : {kIndex18, kIndex36, 0.5}) {
        auto s = eom_symplectic_single(l, {200e3, m, 0.0}, Beam::Conjugate);
        double j0 = bessel_j(0, m), j1 = bessel_j(1, m);
        double predicted = 1 - j0 * j0 - j1 * j1;
        CHECK(symplectic_defect(s) == doctest::Approx(predicted).epsilon(1e-10));
        CHECK(symplectic_defect(s) > j1 * j1 * 0.99);
    }
}

TEST_CASE("multi-tone composition") {
    ModeLayout l = {12, 100e3, 90e3, 100e3, 9};
    QuadIndex q(l);

    SUBCASE("empty drive gives the identity") {
        auto s = eom_symplectic(l, {});
        CHECK((s.m - Eigen::MatrixXd::Identity(q.dim(), q.dim())).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("coupling support sits at the drive offsets") {
        DriveSpec d;
        d.tones = {{100e3, kIndex18, 0}, {300e3, kIndex18, 0}, {900e3, kIndex18, 0}};
        auto s = eom_symplectic(l, d);
        double j1 = bessel_j(1, kIndex18);
        // X<-P support of an interior row: J1 at offsets {1, 3, 9}; tone-sum
        // offsets like 5 = |1 + 3 - 9| only appear as triple hops at J1^3
        int i = l.interior_begin() + 5;
        for (int j = 0; j < l.total_bins(); ++j) {
            double w = s.m(q.xc(i), q.pc(j));
            int off = std::abs(j - i);
            if (off == 1 || off == 3 || off == 9)
                CHECK(std::abs(w) > 0.085);
            else
                CHECK(std::abs(w) < 1.5 * j1 * j1 * j1);
        }
    }

    SUBCASE("single tone couples exactly at its offset") {
        DriveSpec d;
        d.tones = {{300e3, kIndex18, 0}};
        auto s = eom_symplectic(l, d);
        int i = l.interior_begin() + 5;
        for (int j = 0; j < l.total_bins(); ++j) {
            double w = s.m(q.xc(i), q.pc(j));
            if (std::abs(j - i) != 3) CHECK(w == 0.0);
        }
    }

    SUBCASE("tone ordering commutes exactly on interior rows") {
        DriveSpec asc, desc;
        asc.tones = {{100e3, kIndex18, 0}, {300e3, kIndex18, 0}};
        desc.tones = asc.tones;
        auto sa = eom_symplectic(l, asc);
        // manual reversed product
        auto s1 = eom_symplectic_single(l, asc.tones[0], Beam::Conjugate);
        auto s3 = eom_symplectic_single(l, asc.tones[1], Beam::Conjugate);
        Eigen::MatrixXd reversed = s1.m * s3.m;
        Eigen::MatrixXd diff = (sa.m - reversed).cwiseAbs();
        // guard rows absorb the boundary effect; interior rows agree exactly
        double interior_max = 0, global_max = diff.maxCoeff();
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int i = l.interior_begin(); i < l.interior_end(); ++i)
                    for (int j = l.interior_begin(); j < l.interior_end(); ++j)
                        interior_max = std::max(
                            interior_max, diff(a * l.total_bins() + i, b * l.total_bins() + j));
        CHECK(interior_max < 1e-15);
        double j1 = bessel_j(1, kIndex18);
        CHECK(global_max <= j1 * j1 * 1.01);
    }

    SUBCASE("duplicate and non-ascending tones are rejected") {
        DriveSpec bad;
        bad.tones = {{300e3, 0.1, 0}, {100e3, 0.1, 0}};
        CHECK_THROWS(eom_symplectic(l, bad));
    }
}

TEST_CASE("apply preserves symmetry and positive definiteness") {
    ModeLayout l = layout_n(5, 1);
    auto sig = vacuum_covariance(l);
    SUBCASE("identity leaves the state untouched") {
        auto out = apply({Eigen::MatrixXd::Identity(sig.m.rows(), sig.m.rows())}, sig);
        CHECK((out.m - sig.m).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("full chain") {
        auto s_t = tms_symplectic(l, SqueezeProfile::flat(l, 0.3));
        DriveSpec d;
        d.tones = {{200e3, kIndex18, 0}};
        auto s_e = eom_symplectic(l, d);
        auto out = apply(s_e, apply(s_t, sig));
        CHECK((out.m - out.m.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.m);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS(apply({Eigen::MatrixXd::Identity(4, 4)}, sig));
    }
}

TEST_CASE("sideband symmetry despite a single-beam modulator") {
    // the chained covariance shows X-P sidebands in both beams
    ModeLayout l = layout_n(6, 1);
    QuadIndex q(l);
    auto s_t = tms_symplectic(l, SqueezeProfile::flat(l, 0.25));
    DriveSpec d;
    d.tones = {{200e3, kIndex36, 0}};
    auto sig = apply(eom_symplectic(l, d), apply(s_t, vacuum_covariance(l)));
    int i = 3;
    CHECK(std::abs(sig.m(q.xp(i), q.pc(i + 1))) > 1e-3);
    CHECK(std::abs(sig.m(q.xc(i), q.pp(i + 1))) > 1e-3);
    CHECK(sig.m(q.xp(i), q.pc(i + 1)) ==
          doctest::Approx(sig.m(q.xc(i), q.pp(i + 1))).epsilon(1e-10));
}

TEST_CASE("beam placement: probe and conjugate modulation give the same state") {
    ModeLayout l = {20, 100e3, 90e3, 100e3, 4};
    int n = l.total_bins();
    auto sig0 = apply(tms_symplectic(l, SqueezeProfile::flat(l, 0.22)), vacuum_covariance(l));
    DriveSpec dp, dc;
    dp.tones = dc.tones = {{100e3, kIndex18, 0}, {300e3, kIndex18, 0}};
    dp.target_beam = Beam::Probe;
    dc.target_beam = Beam::Conjugate;
    auto sp = apply(eom_symplectic(l, dp), sig0);
    auto sc = apply(eom_symplectic(l, dc), sig0);

    auto sector = [&](const CovarianceMatrix& s, int a, int b) {
        return s.m.block(a * n, b * n, n, n)
            .block(l.interior_begin(), l.interior_begin(), l.mode_count, l.mode_count);
    };
    SUBCASE("cross-beam sectors agree entry by entry") {
        for (auto [a, b] : {std::pair{0, 1}, {0, 3}, {1, 2}, {2, 3}}) {
            CHECK((sector(sp, a, b) - sector(sc, a, b)).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("full matrices agree under beam relabeling") {
        Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(4 * n, 4 * n);
        for (int i = 0; i < n; ++i) {
            perm(i, n + i) = perm(n + i, i) = 1.0;
            perm(2 * n + i, 3 * n + i) = perm(3 * n + i, 2 * n + i) = 1.0;
        }
        CHECK((sp.m - perm * sc.m * perm.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("one modulator at 2m equals one per beam at m, to first order") {
    ModeLayout l = {20, 100e3, 90e3, 100e3, 4};
    int n = l.total_bins();
    double mp = kIndex18;
    auto sig0 = apply(tms_symplectic(l, SqueezeProfile::flat(l, 0.22)), vacuum_covariance(l));
    DriveSpec single, both;
    single.tones = {{100e3, 2 * mp, 0}};
    single.target_beam = Beam::Conjugate;
    both.tones = {{100e3, 2 * mp, 0}};
    both.target_beam = Beam::BothHalved;  // applies m per beam
    auto s1 = apply(eom_symplectic(l, single), sig0);
    auto s2 = apply(eom_symplectic(l, both), sig0);
    double worst = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            worst = std::max(worst, (s1.m.block(a * n, b * n, n, n) - s2.m.block(a * n, b * n, n, n))
                                        .block(l.interior_begin(), l.interior_begin(),
                                               l.mode_count, l.mode_count)
                                        .cwiseAbs()
                                        .maxCoeff());
    CHECK(worst <= 5 * mp * mp * mp);
}

TEST_CASE("unmix chain inverts the modulator to second order") {
    ModeLayout l = {16, 100e3, 90e3, 100e3, 4};
    DriveSpec d;
    d.tones = {{100e3, kIndex18, 0}, {300e3, kIndex18, 0}};
    Eigen::MatrixXd prod = eom_unmix(l, d).m * eom_symplectic(l, d).m;
    int dim = 4 * l.total_bins();
    double j1 = bessel_j(1, kIndex18);
    double dev = (prod - Eigen::MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff();
    CHECK(dev < 2.1 * j1 * j1);
    CHECK(dev > 0.0);
}

TEST_CASE("drive validation warns but does not reject large indices") {
    ModeLayout l = layout_n(4, 1);
    DriveSpec d;
    d.tones = {{200e3, 0.6, 0}};
    CHECK_NOTHROW(d.validate(l));
}
