#include "cvl/bessel.hpp"

#include <cmath>
#include <stdexcept>

namespace cvl {

// J_n(m) = sum_{s>=0} (-1)^s / (s! (n+s)!) (m/2)^{n+2s}
double bessel_j(int n, double m) {
    if (n < 0) throw std::invalid_argument("bessel_j: order must be >= 0");
    if (m < 0) throw std::invalid_argument("bessel_j: argument must be >= 0");
    const double half = m / 2.0;
    double term = 1.0;
    for (int i = 1; i <= n; ++i) term *= half / i;  // (m/2)^n / n!
    double sum = term;
    const double h2 = half * half;
    for (int s = 1; s < 64; ++s) {
        term *= -h2 / (s * (n + s));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum) + 1e-300) break;
    }
    return sum;
}

}  // namespace cvl
