// Adjacency-structure extraction and verification: covariance-weighted graphs,
// graphical-calculus (V, U) extraction, Gaussian local unitary rotations, and
// expected hypercube lattices with traceback-edge tagging.
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cvl/gaussian.hpp"
#include "cvl/layout.hpp"

namespace cvl {

enum class EdgeKind { Lattice, Traceback, Extraneous };

struct AdjacencyGraph {
    struct Node {
        int index = 0;         // interior mode index, 1-based
        double center_hz = 0;  // bin center
    };
    struct Edge {
        int a = 0;
        int b = 0;  // node indices (1-based interior), a < b
        double weight = 0.0;
        EdgeKind kind = EdgeKind::Lattice;
    };
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::string source;  // covariance-weight | graphical-calculus-V | expected

    const Edge* find_edge(int a, int b) const;
};

// Edges between distinct interior mode indices from the cross-beam XP sectors
// of a shot-normalized covariance, |weight| >= threshold. Same-index
// probe-conjugate pairings are omitted.
AdjacencyGraph covariance_adjacency(const CovarianceMatrix& sigma, const ModeLayout& layout,
                                    double threshold);

// Graphical-calculus extraction: V = sym(Sigma_XX^{-1} Sigma_XP),
// U = sym((2 Sigma_XX)^{-1}), with the pure-state consistency residual
// || Sigma_PP - (U + V U^{-1} V)/2 ||_max.
struct VUExtraction {
    Eigen::MatrixXd v;
    Eigen::MatrixXd u;
    double residual = 0.0;
    bool approximate = false;  // input had zeroed same-beam sectors
};
VUExtraction extract_v_u(const CovarianceMatrix& sigma, bool approximate = false);

struct GluSpec {
    double rotation_rad = -1.5707963267948966;  // -pi/2
    bool rotate_even_probe = true;
    bool rotate_odd_conjugate = true;
    int parity_origin = 1;  // interior bin 1 is odd
};

SymplecticMatrix glu_symplectic(const ModeLayout& layout, const GluSpec& spec);
CovarianceMatrix glu_transform(const CovarianceMatrix& sigma, const ModeLayout& layout,
                               const GluSpec& spec = {});

// Off-diagonal mass of a mode-space matrix: sum of squared off-diagonal
// entries over interior modes, excluding same-index probe-conjugate pairs.
double offdiagonal_mass(const Eigen::MatrixXd& m, const ModeLayout& layout);

struct HypercubeSpec {
    std::vector<int> offsets;  // strictly increasing, each dividing the next
    int dimension() const { return static_cast<int>(offsets.size()); }
    static HypercubeSpec from_drive(const ModeLayout& layout, const DriveSpec& drive);
};

// Node i connects to i +- k_j for every offset; edges that wrap a lattice row
// of the folded 1-D axis are tagged Traceback.
AdjacencyGraph expected_hypercube(const ModeLayout& layout, const HypercubeSpec& spec);

struct StructureReport {
    std::vector<AdjacencyGraph::Edge> matched;
    std::vector<AdjacencyGraph::Edge> missing;
    std::vector<AdjacencyGraph::Edge> extraneous;
    std::vector<AdjacencyGraph::Edge> traceback;
    double extraneous_fraction_limit = 0.05;
    bool pass = false;
};

StructureReport verify_structure(const AdjacencyGraph& measured, const AdjacencyGraph& expected,
                                 double threshold, double extraneous_fraction_limit = 0.05);

std::string graph_to_json(const AdjacencyGraph& g);
AdjacencyGraph graph_from_json(const std::string& text);
std::string graph_to_dot(const AdjacencyGraph& g);

// symplectic spectrum |eig(Sigma * Omega)|, sorted ascending
Eigen::VectorXd symplectic_eigenvalues(const CovarianceMatrix& sigma);

}  // namespace cvl
