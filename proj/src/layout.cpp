#include "cvl/layout.hpp"

#include <cmath>
#include <iostream>

namespace cvl {

void ModeLayout::validate() const {
    require(mode_count >= 2, "layout: mode_count must be >= 2");
    require(guard_modes >= 0, "layout: guard_modes must be >= 0");
    require(spacing_hz > 0, "layout: spacing must be positive");
    require(bin_width_hz > 0 && bin_width_hz < spacing_hz,
            "layout: bin_width must satisfy 0 < width < spacing");
    require(start_center_hz >= bin_width_hz / 2,
            "layout: start_center must be >= bin_width/2");
}

int DriveTone::offset(const ModeLayout& layout) const {
    double k = frequency_hz / layout.spacing_hz;
    int ki = static_cast<int>(std::lround(k));
    require(std::abs(k - ki) < 1e-9 && ki >= 1,
            "drive tone frequency must be a positive integer multiple of the bin spacing");
    return ki;
}

int DriveSpec::max_offset(const ModeLayout& layout) const {
    int kmax = 0;
    for (const auto& t : tones) kmax = std::max(kmax, t.offset(layout));
    return kmax;
}

void DriveSpec::validate(const ModeLayout& layout) const {
    double prev = 0.0;
    for (const auto& t : tones) {
        require(t.frequency_hz > prev, "drive tones must be strictly ascending with no duplicates");
        prev = t.frequency_hz;
        require(t.mod_index >= 0, "modulation index must be >= 0");
        t.offset(layout);
        if (t.mod_index > 0.5)
            std::cerr << "warning: modulation index " << t.mod_index
                      << " > 0.5; first-sideband model degrades\n";
    }
}

SqueezeProfile SqueezeProfile::flat(const ModeLayout& layout, double r) {
    SqueezeProfile p;
    p.r_of_bin.assign(layout.total_bins(), r);
    return p;
}

double SqueezeProfile::r_from_epr(double epr) {
    require(epr > 0 && epr <= 1, "normalized EPR variance must be in (0, 1]");
    return -std::log(epr) / 4.0;
}

SqueezeProfile SqueezeProfile::smooth(const ModeLayout& layout, double r_peak,
                                      double bw_hz, double lf_rolloff_hz) {
    SqueezeProfile p;
    p.r_of_bin.resize(layout.total_bins());
    for (int b = 0; b < layout.total_bins(); ++b) {
        double f = std::max(layout.center_hz(b), 0.0);
        double r = r_peak / (1.0 + (f / bw_hz) * (f / bw_hz));
        if (lf_rolloff_hz > 0) {
            double x = f / lf_rolloff_hz;
            r *= x * x / (1.0 + x * x);
        }
        p.r_of_bin[b] = r;
    }
    return p;
}

void SqueezeProfile::validate(const ModeLayout& layout) const {
    require(static_cast<int>(r_of_bin.size()) == layout.total_bins(),
            "squeeze profile length must equal total bin count (interior + guards)");
    for (double r : r_of_bin)
        require(std::isfinite(r) && r >= 0, "squeeze parameters must be finite and >= 0");
}

}  // namespace cvl
