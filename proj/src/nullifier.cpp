#include "cvl/nullifier.hpp"

#include <algorithm>
#include <cmath>

#include "cvl/bessel.hpp"

namespace cvl {

NullifierMatrix epr_nullifier_matrix(const ModeLayout& layout) {
    layout.validate();
    QuadIndex q(layout);
    NullifierMatrix n;
    n.bins = q.n;
    n.rows = Eigen::MatrixXd::Zero(2 * q.n, q.dim());
    for (int i = 0; i < q.n; ++i) {
        n.rows(n.x_row(i), q.xp(i)) = 1.0;
        n.rows(n.x_row(i), q.xc(i)) = -1.0;
        n.rows(n.p_row(i), q.pp(i)) = 1.0;
        n.rows(n.p_row(i), q.pc(i)) = 1.0;
    }
    return n;
}

NullifierMatrix transform_nullifiers(const NullifierMatrix& n, const SymplecticMatrix& s_eom) {
    require(n.rows.cols() == s_eom.m.rows(), "transform_nullifiers: dimension mismatch");
    // N' = N S^{-1}, i.e. solve S^T y = row^T for every row
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(s_eom.m.transpose());
    double rcond = lu.rcond();
    require(rcond > 1e-14, "transform_nullifiers: singular modulator matrix, rcond = " +
                               std::to_string(rcond));
    NullifierMatrix out;
    out.bins = n.bins;
    out.rows = lu.solve(n.rows.transpose()).transpose();
    return out;
}

NullifierMatrix transform_nullifiers(const NullifierMatrix& n, const ModeLayout& layout,
                                     const DriveSpec& drive) {
    NullifierMatrix out;
    out.bins = n.bins;
    out.rows = n.rows * eom_unmix(layout, drive).m;
    return out;
}

double nullifier_variance(const NullifierMatrix& n, int row, const CovarianceMatrix& sigma) {
    require(n.rows.cols() == sigma.m.rows(), "nullifier_variance: dimension mismatch");
    require(row >= 0 && row < n.rows.rows(), "nullifier_variance: row out of range");
    return n.rows.row(row) * sigma.m * n.rows.row(row).transpose();
}

double direct_expansion_variance(const CovarianceMatrix& sigma, const ModeLayout& layout,
                                 int mode, const DriveTone& tone, Quadrature quad, Beam beam) {
    require(beam != Beam::BothHalved, "direct expansion covers a single modulated beam");
    int k = tone.offset(layout);
    int n = layout.total_bins();
    require(mode - k >= 0 && mode + k < n, "mode too close to the spectral edge");
    double j0 = bessel_j(0, tone.mod_index);
    double j1 = bessel_j(1, tone.mod_index);
    QuadIndex q(layout);
    const Eigen::MatrixXd& S = sigma.m;
    bool conj = (beam == Beam::Conjugate);
    // quadrature indices of the unmodulated (u) and modulated (m) beams
    auto xu = [&](int i) { return conj ? q.xp(i) : q.xc(i); };
    auto xm = [&](int i) { return conj ? q.xc(i) : q.xp(i); };
    auto pu = [&](int i) { return conj ? q.pp(i) : q.pc(i); };
    auto pm = [&](int i) { return conj ? q.pc(i) : q.pp(i); };
    int i = mode, lo = mode - k, hi = mode + k;

    if (quad == Quadrature::X) {
        // <[Xu - (J0 Xm - J1 Pm(i-k) - J1 Pm(i+k))]^2>, term by term.
        // The unmixing convention pairs +J1 sidebands with the forward -B
        // block, so the substituted X' carries -J1 P sidebands.
        double xw[2] = {1.0, -j0};
        int xi[2] = {xu(i), xm(i)};
        double pw[2] = {j1, j1};
        int pi[2] = {pm(lo), pm(hi)};
        double v = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) v += xw[a] * xw[b] * S(xi[a], xi[b]);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) v += pw[a] * pw[b] * S(pi[a], pi[b]);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) v += 2.0 * xw[a] * pw[b] * S(xi[a], pi[b]);
        return v;
    }
    // <[Pu + (J0 Pm + J1 Xm(i-k) + J1 Xm(i+k))]^2>
    double pw[2] = {1.0, j0};
    int pi[2] = {pu(i), pm(i)};
    double xw[2] = {j1, j1};
    int xi[2] = {xm(lo), xm(hi)};
    double v = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) v += pw[a] * pw[b] * S(pi[a], pi[b]);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) v += xw[a] * xw[b] * S(xi[a], xi[b]);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) v += 2.0 * pw[a] * xw[b] * S(pi[a], xi[b]);
    return v;
}

NullifierReport nullifier_report(const CovarianceMatrix& sigma, const CovarianceMatrix& shot,
                                 const NullifierMatrix& epr, const NullifierMatrix& transformed,
                                 const ModeLayout& layout, int max_offset) {
    require(sigma.m.rows() == shot.m.rows() && epr.rows.cols() == sigma.m.rows() &&
                transformed.rows.cols() == sigma.m.rows(),
            "nullifier_report: dimension mismatch");
    NullifierReport rep;
    auto db = [&](const NullifierMatrix& n, int row) {
        double s = nullifier_variance(n, row, shot);
        require(s > 0, "nullifier_report: nonpositive shot variance");
        return 10.0 * std::log10(nullifier_variance(n, row, sigma) / s);
    };
    for (int b = layout.interior_begin(); b < layout.interior_end(); ++b) {
        NullifierReport::Entry e;
        e.mode = b - layout.interior_begin() + 1;
        e.center_hz = layout.center_hz(b);
        e.epr_x_db = db(epr, epr.x_row(b));
        e.epr_p_db = db(epr, epr.p_row(b));
        e.null_x_db = db(transformed, transformed.x_row(b));
        e.null_p_db = db(transformed, transformed.p_row(b));
        // rows whose sideband span leaves the interior (guard-contaminated or
        // truncated) are flagged and excluded from pass/fail statistics
        e.edge = (b - max_offset < layout.interior_begin()) ||
                 (b + max_offset >= layout.interior_end());
        rep.entries.push_back(e);
    }
    return rep;
}

MeasurementNullifiers measurement_nullifiers(const ModeLayout& layout, const DriveSpec& drive) {
    layout.validate();
    int m = layout.mode_count;
    ModeLayout virt = layout;
    virt.guard_modes = std::max(layout.guard_modes, drive.max_offset(layout));
    // keep the virtual start on the first interior bin so centers agree
    NullifierMatrix epr_v = epr_nullifier_matrix(virt);
    NullifierMatrix null_v = transform_nullifiers(epr_v, virt, drive);

    MeasurementNullifiers out;
    out.edge.assign(m, false);
    QuadIndex qv(virt);
    auto project = [&](const NullifierMatrix& src, bool flag_edges) {
        NullifierMatrix dst;
        dst.bins = m;
        dst.rows = Eigen::MatrixXd::Zero(2 * m, 4 * m);
        for (int i = 0; i < m; ++i) {
            int vb = virt.interior_begin() + i;
            for (int quad = 0; quad < 2; ++quad) {
                int src_row = quad == 0 ? src.x_row(vb) : src.p_row(vb);
                int dst_row = quad == 0 ? dst.x_row(i) : dst.p_row(i);
                for (int col = 0; col < qv.dim(); ++col) {
                    double w = src.rows(src_row, col);
                    if (std::abs(w) < 1e-15) continue;
                    int bin = col % qv.n, block = col / qv.n;
                    if (!virt.is_interior(bin)) {
                        if (flag_edges) out.edge[i] = true;
                        continue;  // unmeasured support is dropped
                    }
                    int mi = bin - virt.interior_begin();
                    dst.rows(dst_row, block * m + mi) = w;
                }
            }
        }
        return dst;
    };
    out.epr = project(epr_v, false);
    out.transformed = project(null_v, true);
    return out;
}

ErrorMatrix error_matrix(const CovarianceMatrix& sigma, const Eigen::MatrixXd& v) {
    int h = static_cast<int>(sigma.m.rows()) / 2;
    require(v.rows() == h && v.cols() == h, "error_matrix: V must be 2N x 2N over the mode space");
    require((v - v.transpose()).cwiseAbs().maxCoeff() < 1e-9, "error_matrix: V must be symmetric");
    Eigen::MatrixXd sxx = sigma.m.topLeftCorner(h, h);
    Eigen::MatrixXd sxp = sigma.m.topRightCorner(h, h);
    Eigen::MatrixXd spp = sigma.m.bottomRightCorner(h, h);
    ErrorMatrix out;
    out.u = 2.0 * (spp - v * sxp - sxp.transpose() * v.transpose() + v * sxx * v.transpose());
    out.u = 0.5 * (out.u + out.u.transpose()).eval();
    out.error_vector = out.u.diagonal();
    return out;
}

}  // namespace cvl
