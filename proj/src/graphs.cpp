#include "cvl/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"

namespace cvl {

const AdjacencyGraph::Edge* AdjacencyGraph::find_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    for (const auto& e : edges)
        if (e.a == a && e.b == b) return &e;
    return nullptr;
}

AdjacencyGraph covariance_adjacency(const CovarianceMatrix& sigma, const ModeLayout& layout,
                                    double threshold) {
    require(sigma.norm == Normalization::ShotNormalized,
            "covariance_adjacency expects a shot-normalized covariance");
    QuadIndex q(layout);
    require(sigma.m.rows() == q.dim(), "covariance_adjacency: dimension mismatch");
    AdjacencyGraph g;
    g.source = "covariance-weight";
    int m = layout.mode_count;
    for (int i = 0; i < m; ++i)
        g.nodes.push_back({i + 1, layout.center_hz(layout.interior_begin() + i)});
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            int bi = layout.interior_begin() + i, bj = layout.interior_begin() + j;
            double w = 0.0;
            for (double cand : {sigma.m(q.xp(bi), q.pc(bj)), sigma.m(q.xp(bj), q.pc(bi)),
                                sigma.m(q.xc(bi), q.pp(bj)), sigma.m(q.xc(bj), q.pp(bi))})
                if (std::abs(cand) > std::abs(w)) w = cand;
            if (std::abs(w) >= threshold) g.edges.push_back({i + 1, j + 1, w, EdgeKind::Lattice});
        }
    }
    return g;
}

VUExtraction extract_v_u(const CovarianceMatrix& sigma, bool approximate) {
    int h = static_cast<int>(sigma.m.rows()) / 2;
    Eigen::MatrixXd sxx = sigma.m.topLeftCorner(h, h);
    Eigen::MatrixXd sxp = sigma.m.topRightCorner(h, h);
    Eigen::MatrixXd spp = sigma.m.bottomRightCorner(h, h);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sxx);
    require(ldlt.info() == Eigen::Success && ldlt.isPositive(),
            "extract_v_u: Sigma_XX is not positive definite");
    VUExtraction out;
    out.approximate = approximate;
    out.v = ldlt.solve(sxp);
    out.v = 0.5 * (out.v + out.v.transpose()).eval();
    out.u = ldlt.solve(0.5 * Eigen::MatrixXd::Identity(h, h));
    out.u = 0.5 * (out.u + out.u.transpose()).eval();
    Eigen::LDLT<Eigen::MatrixXd> uldlt(out.u);
    Eigen::MatrixXd vuv = out.v * uldlt.solve(out.v);
    out.residual = (spp - 0.5 * (out.u + vuv)).cwiseAbs().maxCoeff();
    return out;
}

SymplecticMatrix glu_symplectic(const ModeLayout& layout, const GluSpec& spec) {
    layout.validate();
    QuadIndex q(layout);
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(q.dim(), q.dim());
    double c = std::cos(spec.rotation_rad), s = std::sin(spec.rotation_rad);
    // (X, P) -> (cos X + sin P, -sin X + cos P) on the selected modes
    auto rotate = [&](int x, int p) {
        S(x, x) = c;
        S(x, p) = s;
        S(p, x) = -s;
        S(p, p) = c;
    };
    for (int b = 0; b < q.n; ++b) {
        // parity continues through guards; interior bin `parity_origin` is odd
        int one_based = b - layout.interior_begin() + spec.parity_origin;
        bool odd = (one_based % 2) != 0;
        if (!odd && spec.rotate_even_probe) rotate(q.xp(b), q.pp(b));
        if (odd && spec.rotate_odd_conjugate) rotate(q.xc(b), q.pc(b));
    }
    return {std::move(S)};
}

CovarianceMatrix glu_transform(const CovarianceMatrix& sigma, const ModeLayout& layout,
                               const GluSpec& spec) {
    return apply(glu_symplectic(layout, spec), sigma);
}

double offdiagonal_mass(const Eigen::MatrixXd& m, const ModeLayout& layout) {
    int n = layout.total_bins();
    require(m.rows() == 2 * n && m.cols() == 2 * n, "offdiagonal_mass: 2N x 2N expected");
    double mass = 0.0;
    for (int a = layout.interior_begin(); a < layout.interior_end(); ++a) {
        for (int b = layout.interior_begin(); b < layout.interior_end(); ++b) {
            if (a == b) continue;  // diagonal and same-index probe-conjugate pairing
            for (int s : {0, 1})
                for (int t : {0, 1}) {
                    double e = m(s * n + a, t * n + b);
                    mass += e * e;
                }
        }
    }
    return mass;
}

HypercubeSpec HypercubeSpec::from_drive(const ModeLayout& layout, const DriveSpec& drive) {
    HypercubeSpec spec;
    for (const auto& t : drive.tones) spec.offsets.push_back(t.offset(layout));
    std::sort(spec.offsets.begin(), spec.offsets.end());
    return spec;
}

AdjacencyGraph expected_hypercube(const ModeLayout& layout, const HypercubeSpec& spec) {
    layout.validate();
    require(!spec.offsets.empty() && spec.dimension() <= 4,
            "hypercube dimension must be between 1 and 4");
    for (size_t i = 1; i < spec.offsets.size(); ++i)
        require(spec.offsets[i] > spec.offsets[i - 1], "offsets must be strictly increasing");
    bool divisible = true;
    for (size_t i = 1; i < spec.offsets.size(); ++i)
        divisible = divisible && (spec.offsets[i] % spec.offsets[i - 1] == 0);
    require(divisible || spec.dimension() == 1,
            "hypercube offsets must each divide the next to fold the axis into a lattice");

    AdjacencyGraph g;
    g.source = "expected";
    int m = layout.mode_count;
    for (int i = 0; i < m; ++i)
        g.nodes.push_back({i + 1, layout.center_hz(layout.interior_begin() + i)});
    for (int i = 0; i < m; ++i) {
        for (size_t d = 0; d < spec.offsets.size(); ++d) {
            int k = spec.offsets[d];
            int j = i + k;
            if (j >= m) continue;
            // an edge along direction d is a lattice edge iff it does not wrap
            // a row of the next-coarser folding (the top direction never wraps)
            bool lattice = true;
            if (d + 1 < spec.offsets.size()) {
                int super = spec.offsets[d + 1];
                lattice = (i / super) == (j / super);
            }
            g.edges.push_back({i + 1, j + 1, 1.0,
                               lattice ? EdgeKind::Lattice : EdgeKind::Traceback});
        }
    }
    return g;
}

StructureReport verify_structure(const AdjacencyGraph& measured, const AdjacencyGraph& expected,
                                 double threshold, double extraneous_fraction_limit) {
    require(measured.nodes.size() == expected.nodes.size(), "verify_structure: node-set mismatch");
    StructureReport rep;
    rep.extraneous_fraction_limit = extraneous_fraction_limit;
    std::map<std::pair<int, int>, const AdjacencyGraph::Edge*> want;
    for (const auto& e : expected.edges) want[{std::min(e.a, e.b), std::max(e.a, e.b)}] = &e;
    int lattice_count = 0;
    for (const auto& [key, e] : want)
        if (e->kind == EdgeKind::Lattice) ++lattice_count;

    for (const auto& e : measured.edges) {
        if (std::abs(e.weight) < threshold) continue;
        auto it = want.find({std::min(e.a, e.b), std::max(e.a, e.b)});
        if (it == want.end()) {
            auto ex = e;
            ex.kind = EdgeKind::Extraneous;
            rep.extraneous.push_back(ex);
        } else if (it->second->kind == EdgeKind::Traceback) {
            rep.traceback.push_back(e);
        } else {
            rep.matched.push_back(e);
        }
    }
    for (const auto& [key, e] : want) {
        if (e->kind != EdgeKind::Lattice) continue;
        const auto* found = measured.find_edge(key.first, key.second);
        if (!found || std::abs(found->weight) < threshold) rep.missing.push_back(*e);
    }
    rep.pass = rep.missing.empty() &&
               static_cast<double>(rep.extraneous.size()) <=
                   extraneous_fraction_limit * std::max(lattice_count, 1);
    return rep;
}

namespace {
const char* kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::Lattice: return "lattice";
        case EdgeKind::Traceback: return "traceback";
        default: return "extraneous";
    }
}
EdgeKind kind_from(const std::string& s) {
    if (s == "lattice") return EdgeKind::Lattice;
    if (s == "traceback") return EdgeKind::Traceback;
    return EdgeKind::Extraneous;
}
}  // namespace

std::string graph_to_json(const AdjacencyGraph& g) {
    nlohmann::json j;
    j["source"] = g.source;
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : g.nodes) j["nodes"].push_back({{"index", n.index}, {"center_hz", n.center_hz}});
    j["edges"] = nlohmann::json::array();
    for (const auto& e : g.edges)
        j["edges"].push_back(
            {{"a", e.a}, {"b", e.b}, {"weight", e.weight}, {"kind", kind_name(e.kind)}});
    return j.dump(2);
}

AdjacencyGraph graph_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    AdjacencyGraph g;
    g.source = j.value("source", "");
    for (const auto& n : j.at("nodes"))
        g.nodes.push_back({n.at("index").get<int>(), n.at("center_hz").get<double>()});
    for (const auto& e : j.at("edges"))
        g.edges.push_back({e.at("a").get<int>(), e.at("b").get<int>(),
                           e.at("weight").get<double>(),
                           kind_from(e.at("kind").get<std::string>())});
    return g;
}

std::string graph_to_dot(const AdjacencyGraph& g) {
    std::ostringstream os;
    os << "graph cluster_state {\n  node [shape=circle];\n";
    for (const auto& n : g.nodes)
        os << "  n" << n.index << " [label=\"" << n.index << "\"];\n";
    os.precision(4);
    for (const auto& e : g.edges) {
        os << "  n" << e.a << " -- n" << e.b << " [label=\"" << e.weight << "\"";
        if (e.kind == EdgeKind::Traceback) os << ", style=dashed";
        if (e.kind == EdgeKind::Extraneous) os << ", color=red";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

Eigen::VectorXd symplectic_eigenvalues(const CovarianceMatrix& sigma) {
    int bins = static_cast<int>(sigma.m.rows()) / 4;
    Eigen::MatrixXd prod = sigma.m * symplectic_form(bins);
    Eigen::EigenSolver<Eigen::MatrixXd> es(prod, false);
    Eigen::VectorXd mags = es.eigenvalues().cwiseAbs();
    std::sort(mags.data(), mags.data() + mags.size());
    return mags;
}

}  // namespace cvl
