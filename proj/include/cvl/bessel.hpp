#pragma once

namespace cvl {

// Bessel function of the first kind J_n(m) for integer n >= 0, by power
// series. Accurate to better than 1e-14 for m <= 2 (the modulation indices
// of interest are well below 1).
double bessel_j(int n, double m);

}  // namespace cvl
