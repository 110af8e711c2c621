// Frequency-bin geometry and drive/squeezing descriptions shared by all modules.
//
// Mode ordering convention used throughout: quadrature blocks (Xp, Xc, Pp, Pc),
// mode index ascending within each block. A layout with M interior bins and G
// guard bins per spectral edge has N = M + 2G bins total; guard bins occupy
// [0, G) and [G+M, N) and are excluded from reports.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvl {

struct ModeLayout {
    int mode_count = 0;          // M, interior bins
    double spacing_hz = 0.0;     // bin center spacing
    double bin_width_hz = 0.0;   // usable bin width (< spacing)
    double start_center_hz = 0.0;// center of the first interior bin
    int guard_modes = 0;         // G, extra bins per spectral edge

    int total_bins() const { return mode_count + 2 * guard_modes; }
    int interior_begin() const { return guard_modes; }
    int interior_end() const { return guard_modes + mode_count; }
    bool is_interior(int bin) const {
        return bin >= interior_begin() && bin < interior_end();
    }
    // center of global bin index (guards may have non-positive centers; the
    // analytic engine treats the axis as an abstract line)
    double center_hz(int bin) const {
        return start_center_hz + (bin - guard_modes) * spacing_hz;
    }
    void validate() const;
};

enum class Beam { Probe, Conjugate, BothHalved };

struct DriveTone {
    double frequency_hz = 0.0;
    double mod_index = 0.0;  // m
    double phase_rad = 0.0;  // phi; must be 0 for the analytic engine

    // offset in bins; frequency must be an integer multiple of the spacing
    int offset(const ModeLayout& layout) const;
};

struct DriveSpec {
    std::vector<DriveTone> tones;  // strictly ascending frequency
    Beam target_beam = Beam::Conjugate;

    bool empty() const { return tones.empty(); }
    int max_offset(const ModeLayout& layout) const;
    void validate(const ModeLayout& layout) const;
};

// Per-bin squeezing parameter r_i, one entry per bin including guards.
struct SqueezeProfile {
    std::vector<double> r_of_bin;

    static SqueezeProfile flat(const ModeLayout& layout, double r);
    // r such that the normalized EPR variance equals epr (epr = e^{-4r})
    static double r_from_epr(double epr);
    // squeezing that tracks the source gain: strongest at low frequency and
    // approaching shot noise near bw_hz; optional low-frequency rolloff
    static SqueezeProfile smooth(const ModeLayout& layout, double r_peak,
                                 double bw_hz, double lf_rolloff_hz = 0.0);
    void validate(const ModeLayout& layout) const;
};

// indices into the 4N-dimensional (Xp, Xc, Pp, Pc) block ordering
struct QuadIndex {
    int n;  // bins per block
    explicit QuadIndex(const ModeLayout& layout) : n(layout.total_bins()) {}
    explicit QuadIndex(int bins) : n(bins) {}
    int xp(int i) const { return i; }
    int xc(int i) const { return n + i; }
    int pp(int i) const { return 2 * n + i; }
    int pc(int i) const { return 3 * n + i; }
    int dim() const { return 4 * n; }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace cvl
