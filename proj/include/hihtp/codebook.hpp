#ifndef HIHTP_CODEBOOK_HPP
#define HIHTP_CODEBOOK_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "hihtp/types.hpp"

namespace hihtp {

/// Linear map A: R^n -> R^m turning a message into a codeword. Only apply and
/// adjoint are required, so structured (fast) codebooks can be plugged in
/// through `custom`.
class Codebook {
public:
    using Map = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    static Codebook identity(index_t n) {
        require(n >= 1, "codebook dimension must be positive");
        Codebook c;
        c.name_ = "identity";
        c.rows_ = c.cols_ = n;
        return c;
    }

    static Codebook dense(Eigen::MatrixXd A, std::string name = "dense") {
        require(A.rows() >= 1 && A.cols() >= 1, "codebook matrix must be non-empty");
        Codebook c;
        c.name_ = std::move(name);
        c.rows_ = A.rows();
        c.cols_ = A.cols();
        c.matrix_ = std::make_shared<const Eigen::MatrixXd>(std::move(A));
        return c;
    }

    static Codebook custom(std::string name, index_t m, index_t n, Map apply, Map adjoint) {
        require(m >= 1 && n >= 1, "codebook dimension must be positive");
        Codebook c;
        c.name_ = std::move(name);
        c.rows_ = m;
        c.cols_ = n;
        c.apply_ = std::move(apply);
        c.adjoint_ = std::move(adjoint);
        return c;
    }

    index_t rows() const noexcept { return rows_; }
    index_t cols() const noexcept { return cols_; }
    const std::string& name() const noexcept { return name_; }
    bool is_identity() const noexcept { return !matrix_ && !apply_; }
    /// Stored matrix for dense codebooks, null otherwise.
    const Eigen::MatrixXd* matrix() const noexcept { return matrix_.get(); }

    Eigen::VectorXd apply(const Eigen::VectorXd& b) const {
        require(b.size() == cols_, "codebook apply: length mismatch");
        if (matrix_) return *matrix_ * b;
        if (apply_) return apply_(b);
        return b;
    }

    Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const {
        require(v.size() == rows_, "codebook adjoint: length mismatch");
        if (matrix_) return matrix_->transpose() * v;
        if (adjoint_) return adjoint_(v);
        return v;
    }

private:
    Codebook() = default;

    std::string name_;
    index_t rows_{0};
    index_t cols_{0};
    std::shared_ptr<const Eigen::MatrixXd> matrix_;
    Map apply_;
    Map adjoint_;
};

}  // namespace hihtp

#endif  // HIHTP_CODEBOOK_HPP
