// End-to-end drivers behind the CLI subcommands: trace simulation with a
// manifest, the full analysis chain, analytic theory outputs, and structure
// verification. Commands parallelize across runs; CVL_THREADS caps the
// worker count.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cvl/config.hpp"
#include "cvl/dsp.hpp"
#include "cvl/graphs.hpp"
#include "cvl/io.hpp"
#include "cvl/nullifier.hpp"

namespace cvl {

struct ManifestEntry {
    std::string path;  // relative to the manifest directory
    TraceKind kind = TraceKind::Signal;
    QuadConfig quad = QuadConfig::XX;
    int run = 0;
    uint64_t seed = 0;
};

struct Manifest {
    ExperimentConfig config;
    std::vector<ManifestEntry> files;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

int worker_count(int runs);

// Writes one CVLT file per run per quadrature config (EOM on), EOM-off XX/PP
// runs when configured, plus per-run shot and electronic-noise references, a
// manifest.json and the config snapshot. Returns the manifest.
Manifest simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct AnalysisResult {
    CovarianceEstimate raw;         // EOM-on, absolute units
    CovarianceEstimate normalized;  // shot-normalized per the config
    NullifierReport report_matrix;
    NullifierReport report_lockin;
    FourCurve four_curve;
    std::vector<PhaseTableEntry> phase_table;
    std::optional<double> delay_estimate_s;
    std::vector<bool> edge_modes;
    ModeLayout layout;
};

// Full pipeline on a manifest: delay estimation/compensation, binning,
// covariance assembly and normalization, nullifier reports by both methods.
// Missing required sectors raise with the sector named.
AnalysisResult analyze(const Manifest& m, const std::filesystem::path& manifest_dir);
void write_analysis(const AnalysisResult& r, const ExperimentConfig& cfg,
                    const std::filesystem::path& out_dir);

struct TheoryResult {
    CovarianceMatrix sigma;             // absolute
    CovarianceMatrix sigma_normalized;  // shot-normalized
    NullifierReport report;
    VUExtraction vu;                    // of the GLU-transformed state
    CovarianceMatrix sigma_glu;
    Eigen::VectorXd error_vector;       // interior modes
    AdjacencyGraph adjacency;
    AdjacencyGraph expected;
};

TheoryResult theory(const ExperimentConfig& cfg);
void write_theory(const TheoryResult& r, const ExperimentConfig& cfg,
                  const std::filesystem::path& out_dir);

// Error vector of a state against its extracted adjacency projected onto the
// expected lattice support (same-index pairing plus the drive offsets).
Eigen::VectorXd projected_error_vector(const CovarianceMatrix& sigma, const ModeLayout& layout,
                                       const DriveSpec& drive);

StructureReport verify(const CovarianceMatrix& sigma_normalized, const ExperimentConfig& cfg,
                       double threshold);
std::string structure_report_json(const StructureReport& rep);

}  // namespace cvl
