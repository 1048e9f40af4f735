#ifndef HIHTP_TESTS_ORACLES_HPP
#define HIHTP_TESTS_ORACLES_HPP

// Test-only reference computations. Nothing here calls into the code paths
// they are used to check.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hihtp/types.hpp"

namespace oracle {

using hihtp::index_t;

/// Defining sum of the circular convolution, term by term.
inline std::vector<double> circular_convolution(const std::vector<double>& h, const std::vector<double>& x) {
    const auto mu = static_cast<index_t>(h.size());
    std::vector<double> y(h.size(), 0.0);
    for (index_t i = 0; i < mu; ++i)
        for (index_t k = 0; k < mu; ++k) y[i] += h[k] * x[((i - k) % mu + mu) % mu];
    return y;
}

/// Smallest ||w - x||^2 over all x supported on exactly s blocks with exactly
/// sigma entries each, by enumerating every such support. Exact-size supports
/// cover the at-most ones, since enlarging a support never increases the
/// distance. The distance is summed over the discarded entries directly.
inline double brute_force_projection_distance(const std::vector<std::vector<double>>& w, int s, int sigma) {
    const int mu = static_cast<int>(w.size());
    const int n = static_cast<int>(w.front().size());

    std::vector<unsigned> entry_masks;
    for (unsigned m = 0; m < (1u << n); ++m)
        if (std::popcount(m) == sigma) entry_masks.push_back(m);

    double best = std::numeric_limits<double>::infinity();
    std::vector<unsigned> mask(static_cast<std::size_t>(mu));
    for (unsigned bm = 0; bm < (1u << mu); ++bm) {
        if (std::popcount(bm) != s) continue;
        std::vector<int> blocks;
        for (int k = 0; k < mu; ++k)
            if (bm & (1u << k)) blocks.push_back(k);
        // Odometer over one entry mask per chosen block.
        std::vector<std::size_t> pick(blocks.size(), 0);
        while (true) {
            std::fill(mask.begin(), mask.end(), 0u);
            for (std::size_t b = 0; b < blocks.size(); ++b) mask[static_cast<std::size_t>(blocks[b])] = entry_masks[pick[b]];
            double dropped = 0.0;
            for (int k = 0; k < mu; ++k)
                for (int j = 0; j < n; ++j)
                    if (!(mask[static_cast<std::size_t>(k)] & (1u << j))) dropped += w[k][j] * w[k][j];
            best = std::min(best, dropped);
            std::size_t d = 0;
            while (d < pick.size() && ++pick[d] == entry_masks.size()) pick[d++] = 0;
            if (d == pick.size()) break;
        }
    }
    return best;
}

/// Dense matrix of the lifted blind-convolution operator: column (k, j) is
/// the j-th column of Q = U A circularly shifted down by k.
inline Eigen::MatrixXd blind_conv_matrix(const Eigen::MatrixXd& U, const Eigen::MatrixXd& A) {
    const index_t mu = U.rows();
    const index_t n = A.cols();
    const Eigen::MatrixXd Q = U * A;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(mu, mu * n);
    for (index_t k = 0; k < mu; ++k)
        for (index_t j = 0; j < n; ++j)
            for (index_t i = 0; i < mu; ++i) C((i + k) % mu, k * n + j) = Q(i, j);
    return C;
}

/// Dense demixing operator: rows are antenna-major, columns user-major.
inline Eigen::MatrixXd demix_matrix(const Eigen::MatrixXd& D, const std::vector<Eigen::MatrixXd>& per_user) {
    const index_t M = D.rows(), N = D.cols();
    const index_t rows = per_user.front().rows(), cols = per_user.front().cols();
    Eigen::MatrixXd out(M * rows, N * cols);
    for (index_t j = 0; j < M; ++j)
        for (index_t i = 0; i < N; ++i) out.block(j * rows, i * cols, rows, cols) = D(j, i) * per_user[i];
    return out;
}

inline Eigen::VectorXd flat(const hihtp::BlockVector& w) {
    auto v = w.values();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<index_t>(v.size()));
}

inline Eigen::MatrixXd gaussian(index_t rows, index_t cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Eigen::MatrixXd A(rows, cols);
    for (index_t j = 0; j < cols; ++j)
        for (index_t i = 0; i < rows; ++i) A(i, j) = g(rng);
    return A;
}

inline hihtp::BlockVector random_block_vector(hihtp::BlockShape shape, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    hihtp::BlockVector w(shape);
    for (double& v : w.values()) v = g(rng);
    return w;
}

}  // namespace oracle

#endif  // HIHTP_TESTS_ORACLES_HPP
