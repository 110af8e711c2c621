#include "cvl/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace cvl {

namespace {
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

std::vector<std::complex<double>> fft_real(const std::vector<double>& x) {
    int n = static_cast<int>(x.size());
    if (n < 2) throw std::invalid_argument("fft_real: need at least 2 samples");
    std::vector<double> in(x);
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<double> ifft_real(const std::vector<std::complex<double>>& half, int n) {
    if (static_cast<int>(half.size()) != n / 2 + 1)
        throw std::invalid_argument("ifft_real: spectrum length must be n/2 + 1");
    std::vector<std::complex<double>> in(half);
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(in.data()), out.data(),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    for (double& v : out) v /= n;
    return out;
}

std::vector<std::complex<double>> ifft_complex(const std::vector<std::complex<double>>& in) {
    int n = static_cast<int>(in.size());
    std::vector<std::complex<double>> buf(in);
    std::vector<std::complex<double>> out(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf.data()),
                                reinterpret_cast<fftw_complex*>(out.data()), FFTW_BACKWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

}  // namespace cvl
