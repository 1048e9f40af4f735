#ifndef HIHTP_OPERATORS_HPP
#define HIHTP_OPERATORS_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hihtp/codebook.hpp"
#include "hihtp/convolution.hpp"
#include "hihtp/projection.hpp"
#include "hihtp/types.hpp"

namespace hihtp {

/// A linear map from block vectors to flat measurement vectors with its
/// adjoint. `adjoint_on` is the adjoint followed by `restrict`; operators
/// implement it directly when only the supported entries are cheap to form.
template <class Op>
concept MeasurementOperator = requires(const Op& op, const BlockVector& w, const Eigen::VectorXd& y,
                                       const HiSupport& support) {
    { op.input_shape() } -> std::convertible_to<BlockShape>;
    { op.output_size() } -> std::convertible_to<index_t>;
    { op.apply(w) } -> std::convertible_to<Eigen::VectorXd>;
    { op.adjoint(y) } -> std::convertible_to<BlockVector>;
};

template <MeasurementOperator Op>
BlockVector adjoint_on(const Op& op, const Eigen::VectorXd& y, const HiSupport& support) {
    if constexpr (requires { { op.adjoint_on(y, support) } -> std::convertible_to<BlockVector>; })
        return op.adjoint_on(y, support);
    else
        return restrict(op.adjoint(y), support).data;
}

/// Lifted blind-convolution operator: C(h (x) b) = h * (Q b) with Q = U A.
/// The k-th block of the lifted vector is encoded by Q and circularly
/// shifted by k before all blocks are summed.
class BlindConvOp {
public:
    BlindConvOp(Eigen::MatrixXd U, Codebook A) : U_(std::move(U)), A_(std::move(A)) {
        require(U_.rows() >= 1 && U_.cols() >= 1, "U must be non-empty");
        require(U_.cols() == A_.rows(), "U columns must match codebook rows");
    }
    explicit BlindConvOp(Eigen::MatrixXd U) : BlindConvOp(U, Codebook::identity(U.cols())) {}

    index_t mu() const noexcept { return U_.rows(); }
    index_t m() const noexcept { return U_.cols(); }
    index_t n() const noexcept { return A_.cols(); }
    const Eigen::MatrixXd& U() const noexcept { return U_; }
    const Codebook& codebook() const noexcept { return A_; }

    BlockShape input_shape() const noexcept { return {1, mu(), n()}; }
    index_t output_size() const noexcept { return mu(); }

    /// Q b.
    Eigen::VectorXd encode(std::span<const double> b) const {
        require(static_cast<index_t>(b.size()) == n(), "encode: message length mismatch");
        Eigen::VectorXd z = Eigen::VectorXd::Zero(mu());
        if (A_.is_identity()) {
            for (index_t j = 0; j < n(); ++j)
                if (b[static_cast<std::size_t>(j)] != 0.0) z.noalias() += b[static_cast<std::size_t>(j)] * U_.col(j);
            return z;
        }
        Eigen::VectorXd bv = Eigen::Map<const Eigen::VectorXd>(b.data(), n());
        return U_ * A_.apply(bv);
    }

    /// Q^T v.
    Eigen::VectorXd encode_adjoint(const Eigen::VectorXd& v) const {
        require(v.size() == mu(), "encode_adjoint: length mismatch");
        return A_.adjoint(U_.transpose() * v);
    }

    /// C(w) for a two-level block vector of shape mu x n.
    Eigen::VectorXd apply(const BlockVector& w) const {
        require(w.shape() == input_shape(), "conv_apply: shape mismatch");
        return apply_blocks(w.user_data(0));
    }

    /// C(w) where `blocks` holds mu consecutive blocks of length n.
    Eigen::VectorXd apply_blocks(std::span<const double> blocks) const {
        require(static_cast<index_t>(blocks.size()) == mu() * n(), "conv_apply: size mismatch");
        const index_t len = mu();
        Eigen::VectorXd y = Eigen::VectorXd::Zero(len);
        for (index_t k = 0; k < len; ++k) {
            auto wk = blocks.subspan(static_cast<std::size_t>(k * n()), static_cast<std::size_t>(n()));
            if (std::all_of(wk.begin(), wk.end(), [](double v) { return v == 0.0; })) continue;
            const Eigen::VectorXd z = encode(wk);
            for (index_t i = 0; i < len; ++i) y[(i + k) % len] += z[i];
        }
        return y;
    }

    /// C(h (x) b) evaluated filter-major as h * (Q b).
    Eigen::VectorXd apply_factored(std::span<const double> h, std::span<const double> b,
                                   ConvBackend backend = ConvBackend::direct) const {
        require(static_cast<index_t>(h.size()) == mu(), "apply_factored: filter length mismatch");
        const Eigen::VectorXd x = encode(b);
        auto y = circular_convolve(h, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), backend);
        return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<index_t>(y.size()));
    }

    /// C^*(y): block k is Q^T applied to y shifted back by k.
    BlockVector adjoint(const Eigen::VectorXd& y) const {
        require(y.size() == mu(), "conv_adjoint: length mismatch");
        BlockVector out(input_shape());
        adjoint_into(y, out.user_data(0));
        return out;
    }

    void adjoint_into(const Eigen::VectorXd& y, std::span<double> blocks) const {
        const index_t len = mu();
        Eigen::MatrixXd shifted(len, len);
        for (index_t k = 0; k < len; ++k)
            for (index_t i = 0; i < len; ++i) shifted(i, k) = y[(i + k) % len];
        const Eigen::MatrixXd G = U_.transpose() * shifted;  // m x mu
        for (index_t k = 0; k < len; ++k) {
            auto dst = blocks.subspan(static_cast<std::size_t>(k * n()), static_cast<std::size_t>(n()));
            if (A_.is_identity()) {
                for (index_t j = 0; j < n(); ++j) dst[static_cast<std::size_t>(j)] = G(j, k);
            } else {
                const Eigen::VectorXd v = A_.adjoint(G.col(k));
                std::copy(v.data(), v.data() + n(), dst.begin());
            }
        }
    }

    /// restrict(C^*(y), support), forming only the supported entries.
    BlockVector adjoint_on(const Eigen::VectorXd& y, const HiSupport& support) const {
        require(y.size() == mu(), "conv_adjoint: length mismatch");
        BlockVector out(input_shape());
        adjoint_on_into(y, support, 0, out.user_data(0));
        return out;
    }

    void adjoint_on_into(const Eigen::VectorXd& y, const HiSupport& support, index_t user,
                         std::span<double> blocks) const {
        const index_t len = mu();
        Eigen::VectorXd yk(len);
        for (const auto& b : support.blocks) {
            if (b.user != user) continue;
            const index_t k = b.block;
            for (index_t i = 0; i < len; ++i) yk[i] = y[(i + k) % len];
            auto dst = blocks.subspan(static_cast<std::size_t>(k * n()), static_cast<std::size_t>(n()));
            if (A_.is_identity()) {
                for (index_t j : b.entries) dst[static_cast<std::size_t>(j)] = U_.col(j).dot(yk);
            } else {
                const Eigen::VectorXd v = encode_adjoint(yk);
                for (index_t j : b.entries) dst[static_cast<std::size_t>(j)] = v[j];
            }
        }
    }

private:
    Eigen::MatrixXd U_;
    Codebook A_;
};

/// Multi-antenna demixing operator: antenna j observes
/// sum_i D(j, i) * C_i(W_i). Measurements are flattened antenna-major, so
/// entry j * mu + t is sample t of antenna j.
class DemixOp {
public:
    DemixOp(Eigen::MatrixXd D, std::vector<BlindConvOp> users) : D_(std::move(D)), users_(std::move(users)) {
        require(D_.rows() >= 1, "mixing matrix needs at least one antenna");
        require(D_.cols() == static_cast<index_t>(users_.size()), "mixing matrix columns must match user count");
        require(!users_.empty(), "demixing needs at least one user");
        for (const auto& u : users_)
            require(u.mu() == users_.front().mu() && u.n() == users_.front().n(),
                    "all users must share mu and n");
    }

    index_t M() const noexcept { return D_.rows(); }
    index_t N() const noexcept { return D_.cols(); }
    index_t mu() const noexcept { return users_.front().mu(); }
    index_t n() const noexcept { return users_.front().n(); }
    const Eigen::MatrixXd& D() const noexcept { return D_; }
    const std::vector<BlindConvOp>& users() const noexcept { return users_; }

    BlockShape input_shape() const noexcept { return {N(), mu(), n()}; }
    index_t output_size() const noexcept { return M() * mu(); }

    Eigen::VectorXd apply(const BlockVector& W) const {
        require(W.shape() == input_shape(), "demix_apply: shape mismatch");
        const index_t len = mu();
        Eigen::VectorXd y = Eigen::VectorXd::Zero(M() * len);
        for (index_t i = 0; i < N(); ++i) {
            auto wi = W.user_data(i);
            if (std::all_of(wi.begin(), wi.end(), [](double v) { return v == 0.0; })) continue;
            const Eigen::VectorXd zi = users_[static_cast<std::size_t>(i)].apply_blocks(wi);
            for (index_t j = 0; j < M(); ++j) y.segment(j * len, len) += D_(j, i) * zi;
        }
        return y;
    }

    BlockVector adjoint(const Eigen::VectorXd& Y) const {
        require(Y.size() == output_size(), "demix_adjoint: shape mismatch");
        BlockVector out(input_shape());
        for (index_t i = 0; i < N(); ++i)
            users_[static_cast<std::size_t>(i)].adjoint_into(mixed_for(Y, i), out.user_data(i));
        return out;
    }

    BlockVector adjoint_on(const Eigen::VectorXd& Y, const HiSupport& support) const {
        require(Y.size() == output_size(), "demix_adjoint: shape mismatch");
        BlockVector out(input_shape());
        index_t last = -1;
        for (const auto& b : support.blocks) {
            if (b.user == last) continue;
            last = b.user;
            users_[static_cast<std::size_t>(b.user)].adjoint_on_into(mixed_for(Y, b.user), support, b.user,
                                                                     out.user_data(b.user));
        }
        return out;
    }

private:
    // sum_j D(j, i) * Y_j
    Eigen::VectorXd mixed_for(const Eigen::VectorXd& Y, index_t i) const {
        const index_t len = mu();
        Eigen::VectorXd v = Eigen::VectorXd::Zero(len);
        for (index_t j = 0; j < M(); ++j) v += D_(j, i) * Y.segment(j * len, len);
        return v;
    }

    Eigen::MatrixXd D_;
    std::vector<BlindConvOp> users_;
};

/// Explicit matrix acting on the flattened block vector. Used for stub
/// operators (identity, orthonormal maps) and small dense experiments.
class DenseOperator {
public:
    DenseOperator(BlockShape shape, Eigen::MatrixXd matrix) : shape_(shape), matrix_(std::move(matrix)) {
        require(matrix_.cols() == shape_.size(), "dense operator columns must match the block shape");
    }
    static DenseOperator identity(BlockShape shape) {
        return {shape, Eigen::MatrixXd::Identity(shape.size(), shape.size())};
    }

    BlockShape input_shape() const noexcept { return shape_; }
    index_t output_size() const noexcept { return matrix_.rows(); }
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }

    Eigen::VectorXd apply(const BlockVector& w) const {
        require(w.shape() == shape_, "dense operator: shape mismatch");
        auto v = w.values();
        return matrix_ * Eigen::Map<const Eigen::VectorXd>(v.data(), shape_.size());
    }
    BlockVector adjoint(const Eigen::VectorXd& y) const {
        require(y.size() == output_size(), "dense operator: length mismatch");
        const Eigen::VectorXd x = matrix_.transpose() * y;
        return BlockVector(shape_, std::vector<double>(x.data(), x.data() + x.size()));
    }

private:
    BlockShape shape_;
    Eigen::MatrixXd matrix_;
};

struct RankOneFactors {
    std::vector<double> h;
    std::vector<double> b;
    double singular_value{0.0};
    /// Leading singular value is (numerically) repeated, or power iteration
    /// did not settle; the pair is valid but not unique.
    bool ambiguous{false};
    int iterations{0};
};

namespace detail {

inline void fix_sign(Eigen::VectorXd& v) {
    Eigen::Index at = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[at])) at = i;
    if (v[at] < 0) v = -v;
}

}  // namespace detail

/// Leading singular pair of the mu x n matricization of a two-level block
/// vector, by power iteration on W^T W. Scaled so that ||b|| = 1 and the
/// largest-magnitude entry of b is positive; h = W b.
inline RankOneFactors rank_one_factor(const BlockVector& w, double tol = 1e-10, int max_iters = 1000) {
    require(w.shape().users == 1, "rank_one_factor expects a two-level vector");
    if (w.is_zero()) throw std::domain_error("rank_one_factor: zero input");
    const auto& shape = w.shape();
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> W(w.values().data(), shape.blocks, shape.entries);

    Eigen::Index top_row = 0;
    W.rowwise().squaredNorm().maxCoeff(&top_row);
    Eigen::VectorXd b = W.row(top_row).transpose().normalized();
    detail::fix_sign(b);

    RankOneFactors out;
    bool converged = false;
    for (int it = 1; it <= max_iters; ++it) {
        Eigen::VectorXd next = W.transpose() * (W * b);
        next.normalize();
        detail::fix_sign(next);
        const double step = (next - b).norm();
        b = std::move(next);
        out.iterations = it;
        if (step <= tol) {
            converged = true;
            break;
        }
    }
    const Eigen::VectorXd h = W * b;
    out.singular_value = h.norm();

    // Second singular value via power iteration on the deflated Gram matrix.
    double second = 0.0;
    if (shape.entries > 1) {
        Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(shape.entries, 1.0, 2.0);
        c -= c.dot(b) * b;
        if (c.norm() < 1e-12) {
            c = Eigen::VectorXd::Unit(shape.entries, 0);
            c -= c.dot(b) * b;
        }
        c.normalize();
        double lambda = 0.0;
        for (int it = 0; it < max_iters; ++it) {
            Eigen::VectorXd next = W.transpose() * (W * c);
            next -= next.dot(b) * b;
            const double norm = next.norm();
            // Below this the deflated Gram matrix is rounding noise.
            if (norm <= 1e-13 * out.singular_value * out.singular_value) {
                lambda = 0.0;
                break;
            }
            next /= norm;
            next -= next.dot(b) * b;
            next.normalize();
            const double lambda_next = (W * next).squaredNorm();
            const bool settled = std::abs(lambda_next - lambda) <= tol * std::max(1.0, lambda_next);
            c = std::move(next);
            lambda = lambda_next;
            if (settled) break;
        }
        second = std::sqrt(std::max(lambda, 0.0));
    }
    out.ambiguous = !converged || second >= (1.0 - 1e-6) * out.singular_value;
    out.h.assign(h.data(), h.data() + h.size());
    out.b.assign(b.data(), b.data() + b.size());
    return out;
}

}  // namespace hihtp

#endif  // HIHTP_OPERATORS_HPP
