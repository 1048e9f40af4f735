#ifndef HIHTP_SOLVER_HPP
#define HIHTP_SOLVER_HPP

#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hihtp/operators.hpp"
#include "hihtp/projection.hpp"
#include "hihtp/types.hpp"

namespace hihtp {

struct SolverConfig {
    double step_size{1.0};
    int max_iters{10};
    bool support_stall_stop{true};
    double ls_tol{1e-10};
    int ls_max_iters{200};
    /// Stop once ||y - A x|| <= rel_err_target * ||y||. Without a target the
    /// solver still stops once the residual is at rounding level
    /// (kResidualFloor * ||y||), where further iterations cannot move x.
    std::optional<double> rel_err_target{};

    static constexpr double kResidualFloor = 1e-14;

    void validate() const {
        require(step_size > 0.0, "step size must be positive");
        require(max_iters >= 1, "max_iters must be at least 1");
        require(ls_tol > 0.0, "ls_tol must be positive");
        require(ls_max_iters >= 1, "ls_max_iters must be at least 1");
        require(!rel_err_target || *rel_err_target > 0.0, "rel_err_target must be positive");
    }

    friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

enum class StopReason { support_stalled, max_iters, residual_target };

inline std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::support_stalled: return "support_stalled";
        case StopReason::max_iters: return "max_iters";
        case StopReason::residual_target: return "residual_target";
    }
    return "unknown";
}

struct LeastSquaresResult {
    HiSparseVector x;
    bool converged{false};
    int iterations{0};
    /// ||y - A x_k|| for k = 0 .. iterations.
    std::vector<double> residual_norms;
};

struct SolveReport {
    HiSparseVector estimate;
    std::vector<HiSupport> support_history;
    std::vector<double> residual_norms;
    int iterations{0};
    StopReason stop_reason{StopReason::max_iters};
    /// False if any inner least-squares solve hit its iteration cap.
    bool ls_converged{true};
};

/// argmin ||y - A x|| over x supported on `support`, by conjugate gradients on
/// the normal equations (CGLS). Only apply and the restricted adjoint are
/// used. Stops when the restricted gradient norm drops to ls_tol * ||y||.
template <MeasurementOperator Op>
LeastSquaresResult restricted_least_squares(const Eigen::VectorXd& y, const Op& op, const HiSupport& support,
                                            const SolverConfig& cfg) {
    const BlockShape shape = op.input_shape();
    require(y.size() == op.output_size(), "restricted_least_squares: measurement length mismatch");
    support.validate(shape);
    require(support.cardinality() >= 1, "restricted_least_squares: empty support");

    std::vector<index_t> pos;
    pos.reserve(static_cast<std::size_t>(support.cardinality()));
    for (const auto& b : support.blocks)
        for (index_t j : b.entries) pos.push_back(shape.offset(b.user, b.block, j));
    const std::size_t k = pos.size();

    BlockVector scratch(shape);
    auto gather = [&](const BlockVector& v) {
        Eigen::VectorXd out(static_cast<index_t>(k));
        for (std::size_t i = 0; i < k; ++i) out[static_cast<index_t>(i)] = v.values()[static_cast<std::size_t>(pos[i])];
        return out;
    };
    auto apply_restricted = [&](const Eigen::VectorXd& v) {
        auto data = scratch.values();
        for (std::size_t i = 0; i < k; ++i) data[static_cast<std::size_t>(pos[i])] = v[static_cast<index_t>(i)];
        Eigen::VectorXd out = op.apply(scratch);
        for (std::size_t i = 0; i < k; ++i) data[static_cast<std::size_t>(pos[i])] = 0.0;
        return out;
    };

    LeastSquaresResult res;
    const double threshold = cfg.ls_tol * y.norm();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<index_t>(k));
    Eigen::VectorXd r = y;
    Eigen::VectorXd g = gather(adjoint_on(op, r, support));
    Eigen::VectorXd p = g;
    double gamma = g.squaredNorm();
    res.residual_norms.push_back(r.norm());
    res.converged = std::sqrt(gamma) <= threshold;

    while (!res.converged && res.iterations < cfg.ls_max_iters) {
        const Eigen::VectorXd q = apply_restricted(p);
        const double qq = q.squaredNorm();
        if (qq == 0.0) break;
        const double alpha = gamma / qq;
        x.noalias() += alpha * p;
        r.noalias() -= alpha * q;
        g = gather(adjoint_on(op, r, support));
        const double gamma_next = g.squaredNorm();
        ++res.iterations;
        res.residual_norms.push_back(r.norm());
        if (std::sqrt(gamma_next) <= threshold) {
            res.converged = true;
            break;
        }
        p = g + (gamma_next / gamma) * p;
        gamma = gamma_next;
    }

    BlockVector out(shape);
    for (std::size_t i = 0; i < k; ++i) out.values()[static_cast<std::size_t>(pos[i])] = x[static_cast<index_t>(i)];
    res.x = HiSparseVector{std::move(out), support};
    return res;
}

/// Hierarchical hard-thresholding pursuit.
///
/// Starting from x = 0, each iteration takes the gradient step
/// x + tau * A^*(y - A x), projects it onto the hierarchically sparse set to
/// pick a support, and replaces x by the least-squares fit on that support.
/// Iterations stop when the support repeats (the iterate would not change),
/// when the residual target is met, or after max_iters.
template <MeasurementOperator Op>
SolveReport hihtp_solve(const Eigen::VectorXd& y, const Op& op, const SparsityLevels& levels,
                        const SolverConfig& cfg = {}) {
    cfg.validate();
    const BlockShape shape = op.input_shape();
    require(y.size() == op.output_size(), "hihtp_solve: measurement length mismatch");
    levels.validate(shape);

    const double y_norm = y.norm();
    const double target = cfg.rel_err_target.value_or(SolverConfig::kResidualFloor) * y_norm;

    SolveReport report;
    report.estimate = HiSparseVector{BlockVector(shape), HiSupport{levels.three_level() ? 3 : 2, {}}};
    Eigen::VectorXd residual = y;
    double residual_norm = y_norm;

    for (int t = 1; t <= cfg.max_iters; ++t) {
        BlockVector step = op.adjoint(residual);
        step *= cfg.step_size;
        step += report.estimate.data;
        HiSupport support = std::move(*project(step, levels).support);

        report.iterations = t;
        if (cfg.support_stall_stop && !report.support_history.empty() && support == report.support_history.back()) {
            report.support_history.push_back(std::move(support));
            report.residual_norms.push_back(residual_norm);
            report.stop_reason = StopReason::support_stalled;
            return report;
        }

        auto ls = restricted_least_squares(y, op, support, cfg);
        report.ls_converged = report.ls_converged && ls.converged;
        report.estimate = std::move(ls.x);
        residual = y - op.apply(report.estimate.data);
        residual_norm = residual.norm();
        report.support_history.push_back(std::move(support));
        report.residual_norms.push_back(residual_norm);
        if (residual_norm <= target) {
            report.stop_reason = StopReason::residual_target;
            return report;
        }
    }
    report.stop_reason = StopReason::max_iters;
    return report;
}

/// ||estimate - truth|| / ||truth|| on the lifted vectors.
inline double relative_error(const BlockVector& estimate, const BlockVector& truth) {
    require(estimate.shape() == truth.shape(), "relative_error: shape mismatch");
    const double t = truth.norm();
    if (t == 0.0) throw std::domain_error("relative_error: zero truth");
    return (estimate - truth).norm() / t;
}

inline double relative_error(const HiSparseVector& estimate, const HiSparseVector& truth) {
    return relative_error(estimate.data, truth.data);
}

}  // namespace hihtp

#endif  // HIHTP_SOLVER_HPP
