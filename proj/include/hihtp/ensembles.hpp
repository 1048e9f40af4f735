#ifndef HIHTP_ENSEMBLES_HPP
#define HIHTP_ENSEMBLES_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hihtp/operators.hpp"
#include "hihtp/rng.hpp"
#include "hihtp/types.hpp"

namespace hihtp {

enum class CodebookKind { identity, custom };

/// Dimensions, sparsity and seed of one random problem instance.
struct EnsembleSpec {
    index_t mu{1};
    index_t m{1};
    index_t n{1};
    index_t N{1};
    index_t M{1};
    index_t s{1};
    index_t sigma{1};
    index_t S{1};
    std::uint64_t seed{0};
    CodebookKind codebook{CodebookKind::identity};

    void validate() const {
        require(mu >= 1 && m >= 1 && n >= 1 && N >= 1 && M >= 1, "ensemble dimensions must be positive");
        require(s >= 1 && s <= mu, "s must lie in [1, mu]");
        require(sigma >= 1 && sigma <= n, "sigma must lie in [1, n]");
        require(S >= 1 && S <= N, "S must lie in [1, N]");
        if (codebook == CodebookKind::identity) require(m == n, "identity codebook needs m == n");
    }

    friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/// Uniformly random k-subset of {0, ..., n-1}, ascending.
inline std::vector<index_t> random_subset(index_t n, index_t k, Engine& rng) {
    require(k >= 0 && k <= n, "subset size out of range");
    std::vector<index_t> pool(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (index_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<index_t> pick(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
}

/// mu x m matrix with i.i.d. N(0, 1/mu) entries.
inline Eigen::MatrixXd gen_U(index_t mu, index_t m, std::uint64_t seed) {
    require(mu >= 1 && m >= 1, "gen_U: dimensions must be positive");
    Engine rng(seed);
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(mu)));
    Eigen::MatrixXd U(mu, m);
    for (index_t j = 0; j < m; ++j)
        for (index_t i = 0; i < mu; ++i) U(i, j) = g(rng);
    return U;
}

/// sigma-sparse message with uniform support and Rademacher entries.
inline std::vector<double> gen_message(index_t n, index_t sigma, std::uint64_t seed) {
    require(sigma >= 1 && sigma <= n, "gen_message: sigma must lie in [1, n]");
    Engine rng(seed);
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    const auto support = random_subset(n, sigma, rng);
    std::bernoulli_distribution coin(0.5);
    for (index_t j : support) b[static_cast<std::size_t>(j)] = coin(rng) ? 1.0 : -1.0;
    return b;
}

/// s-sparse filter with uniform support and standard Gaussian entries.
inline std::vector<double> gen_filter(index_t mu, index_t s, std::uint64_t seed) {
    require(s >= 1 && s <= mu, "gen_filter: s must lie in [1, mu]");
    Engine rng(seed);
    std::vector<double> h(static_cast<std::size_t>(mu), 0.0);
    const auto support = random_subset(mu, s, rng);
    std::normal_distribution<double> g(0.0, 1.0);
    for (index_t k : support) h[static_cast<std::size_t>(k)] = g(rng);
    return h;
}

struct Mixing {
    Eigen::MatrixXd D;
    std::vector<index_t> active;
};

/// M x N mixing matrix with i.i.d. N(0, 1/M) entries and a uniformly random
/// set of S active users. The active set is drawn from its own substream, so
/// it does not depend on M.
inline Mixing gen_mixing(index_t M, index_t N, index_t S, std::uint64_t seed) {
    require(M >= 1 && N >= 1, "gen_mixing: dimensions must be positive");
    require(S >= 1 && S <= N, "gen_mixing: S must lie in [1, N]");
    Engine rng(derive_key(seed, {1}));
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(M)));
    Mixing out{Eigen::MatrixXd(M, N), {}};
    for (index_t i = 0; i < N; ++i)
        for (index_t j = 0; j < M; ++j) out.D(j, i) = g(rng);
    Engine pick(derive_key(seed, {2}));
    out.active = random_subset(N, S, pick);
    return out;
}

/// Monte-Carlo lower bound on a hierarchical RIP constant.
struct RipEstimate {
    double delta_lower{0.0};
    index_t trials{0};
    BlockVector max_witness;
};

/// Random unit-norm hierarchically sparse vector: uniform supports at every
/// level, Gaussian values, then normalized.
inline BlockVector random_hisparse_unit(const BlockShape& shape, const SparsityLevels& levels, std::uint64_t seed) {
    levels.validate(shape);
    Engine rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    BlockVector u(shape);
    const auto users = levels.S ? random_subset(shape.users, *levels.S, rng) : std::vector<index_t>{0};
    for (index_t user : users)
        for (index_t k : random_subset(shape.blocks, levels.s, rng))
            for (index_t j : random_subset(shape.entries, levels.sigma, rng)) u(user, k, j) = g(rng);
    const double norm = u.norm();
    if (norm > 0.0) u *= 1.0 / norm;
    return u;
}

/// max over `trials` random unit (s, sigma)-sparse u of | ||op(u)||^2 - 1 |.
/// Trial t is keyed by (seed, t), so a longer run extends a shorter one and
/// the estimate never decreases with the trial count. This is only a lower
/// bound on the supremum.
template <MeasurementOperator Op>
RipEstimate estimate_hirip(const Op& op, const SparsityLevels& levels, index_t trials, std::uint64_t seed) {
    require(trials >= 1, "estimate_hirip: trials must be positive");
    const BlockShape shape = op.input_shape();
    levels.validate(shape);
    RipEstimate est;
    est.trials = trials;
    est.max_witness = BlockVector(shape);
    for (index_t t = 0; t < trials; ++t) {
        BlockVector u = random_hisparse_unit(shape, levels, stream_key(seed, Stream::hirip, static_cast<std::uint64_t>(t)));
        const double dev = std::abs(op.apply(u).squaredNorm() - 1.0);
        if (t == 0 || dev > est.delta_lower) {
            est.delta_lower = dev;
            est.max_witness = std::move(u);
        }
    }
    return est;
}

}  // namespace hihtp

#endif  // HIHTP_ENSEMBLES_HPP
