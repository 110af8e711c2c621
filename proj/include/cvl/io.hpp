// File formats: CVL1 covariance binary, CVLT trace binary, CSV exports.
// All binary formats are little-endian and fixed-layout; all text output is
// locale-independent with %.17g doubles so outputs are byte-reproducible.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cvl/dsp.hpp"
#include "cvl/gaussian.hpp"
#include "cvl/nullifier.hpp"
#include "cvl/synth.hpp"

namespace cvl {

// CVL1: magic "CVL1", u32 dim, u8 normalization (0 absolute, 1 shot), f64[dim*dim] row-major
void write_covariance_binary(const std::filesystem::path& path, const CovarianceMatrix& m);
CovarianceMatrix read_covariance_binary(const std::filesystem::path& path);

// CSV with '#' header comments carrying the ordering tag and layout
void write_covariance_csv(const std::filesystem::path& path, const CovarianceMatrix& m,
                          const ModeLayout& layout);
CovarianceMatrix read_covariance_csv(const std::filesystem::path& path);

// CVLT: magic "CVLT", u16 version, f64 dt, u64 n, labels, f64 quant_step,
// u16 bits, u64 seed, u8 kind, u32 config-JSON length + bytes, then probe and
// conjugate samples as i8 (bits <= 8) or i16
void write_trace(const std::filesystem::path& path, const TraceSet& t);
TraceSet read_trace(const std::filesystem::path& path);

void write_nullifier_csv(const std::filesystem::path& path, const NullifierReport& report);

struct FourCurve {
    std::vector<double> centers_hz;
    std::vector<double> epr_off_x_db, epr_off_p_db;  // red: EOM off
    std::vector<double> epr_on_x_db, epr_on_p_db;    // blue: EOM on
    std::vector<double> null_x_db, null_p_db;        // gold: matrix nullifiers
    std::vector<double> lockin_x_db, lockin_p_db;    // circles: lock-in nullifiers
    bool has_off = false;
    bool has_lockin = false;
};
void write_four_curve_csv(const std::filesystem::path& path, const FourCurve& fc);

struct PhaseTableEntry {
    double tone_hz = 0.0;
    int bin_a = 0, bin_b = 0;
    double amplitude = 0.0, phase_rad = 0.0;
};
void write_phase_table_csv(const std::filesystem::path& path,
                           const std::vector<PhaseTableEntry>& table);

std::string format_double(double v);

}  // namespace cvl
