#ifndef HIHTP_CONVOLUTION_HPP
#define HIHTP_CONVOLUTION_HPP

#include <complex>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "hihtp/types.hpp"

namespace hihtp {

enum class ConvBackend { direct, fft };

/// y_i = sum_k h_k x_{(i-k) mod mu}, evaluated term by term. O(mu^2); this is
/// the reference the transform path is checked against.
inline std::vector<double> circular_convolve_direct(std::span<const double> h, std::span<const double> x) {
    require(h.size() == x.size(), "circular_convolve: length mismatch");
    const std::size_t mu = h.size();
    std::vector<double> y(mu, 0.0);
    for (std::size_t k = 0; k < mu; ++k) {
        if (h[k] == 0.0) continue;
        for (std::size_t i = 0; i < mu; ++i) y[(i + k) % mu] += h[k] * x[i];
    }
    return y;
}

/// Same product through the DFT, O(mu log mu).
inline std::vector<double> circular_convolve_fft(std::span<const double> h, std::span<const double> x) {
    require(h.size() == x.size(), "circular_convolve: length mismatch");
    if (h.empty()) return {};
    if (h.size() == 1) return {h[0] * x[0]};  // kissfft does not handle length 1
    Eigen::FFT<double> fft;
    std::vector<double> hv(h.begin(), h.end()), xv(x.begin(), x.end());
    std::vector<std::complex<double>> H, X;
    fft.fwd(H, hv);
    fft.fwd(X, xv);
    for (std::size_t i = 0; i < H.size(); ++i) H[i] *= X[i];
    std::vector<double> y;
    fft.inv(y, H);
    y.resize(h.size());
    return y;
}

inline std::vector<double> circular_convolve(std::span<const double> h, std::span<const double> x,
                                             ConvBackend backend = ConvBackend::direct) {
    return backend == ConvBackend::fft ? circular_convolve_fft(h, x) : circular_convolve_direct(h, x);
}

}  // namespace hihtp

#endif  // HIHTP_CONVOLUTION_HPP
