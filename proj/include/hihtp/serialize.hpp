#ifndef HIHTP_SERIALIZE_HPP
#define HIHTP_SERIALIZE_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "hihtp/ensembles.hpp"
#include "hihtp/operators.hpp"
#include "hihtp/solver.hpp"

namespace hihtp {

using json = nlohmann::json;

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& A) {
    std::vector<double> rows;
    rows.reserve(static_cast<std::size_t>(A.size()));
    for (index_t i = 0; i < A.rows(); ++i)
        for (index_t j = 0; j < A.cols(); ++j) rows.push_back(A(i, j));
    return json{{"rows", A.rows()}, {"cols", A.cols()}, {"data", rows}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const index_t r = j.at("rows").get<index_t>();
    const index_t c = j.at("cols").get<index_t>();
    const auto data = j.at("data").get<std::vector<double>>();
    require(r >= 1 && c >= 1 && static_cast<index_t>(data.size()) == r * c, "matrix entry count does not match shape");
    Eigen::MatrixXd A(r, c);
    for (index_t i = 0; i < r; ++i)
        for (index_t k = 0; k < c; ++k) A(i, k) = data[static_cast<std::size_t>(i * c + k)];
    return A;
}

}  // namespace detail

inline json to_json(const BlockShape& s) { return json{{"users", s.users}, {"blocks", s.blocks}, {"entries", s.entries}}; }
inline BlockShape shape_from_json(const json& j) {
    return {j.value("users", index_t{1}), j.at("blocks").get<index_t>(), j.at("entries").get<index_t>()};
}

inline json to_json(const HiSupport& sup) {
    json blocks = json::array();
    for (const auto& b : sup.blocks) blocks.push_back(json{{"user", b.user}, {"block", b.block}, {"entries", b.entries}});
    return json{{"depth", sup.depth}, {"blocks", blocks}};
}

inline HiSupport support_from_json(const json& j) {
    HiSupport sup;
    sup.depth = j.at("depth").get<int>();
    for (const auto& b : j.at("blocks"))
        sup.blocks.push_back(BlockSupport{b.value("user", index_t{0}), b.at("block").get<index_t>(),
                                          b.at("entries").get<std::vector<index_t>>()});
    return sup;
}

inline json to_json(const BlockVector& w) {
    return json{{"shape", to_json(w.shape())}, {"data", std::vector<double>(w.values().begin(), w.values().end())}};
}

inline BlockVector block_vector_from_json(const json& j) {
    return BlockVector(shape_from_json(j.at("shape")), j.at("data").get<std::vector<double>>());
}

inline json to_json(const SparsityLevels& l) {
    json j{{"s", l.s}, {"sigma", l.sigma}};
    if (l.S) j["S"] = *l.S;
    return j;
}

inline SparsityLevels levels_from_json(const json& j) {
    SparsityLevels l{j.at("s").get<index_t>(), j.at("sigma").get<index_t>(), std::nullopt};
    if (j.contains("S")) l.S = j.at("S").get<index_t>();
    return l;
}

inline json to_json(const Codebook& A) {
    json j{{"id", A.name()}, {"rows", A.rows()}, {"cols", A.cols()}};
    if (A.is_identity()) return j;
    if (const auto* M = A.matrix()) {
        j["matrix"] = detail::matrix_to_json(*M);
        return j;
    }
    throw std::invalid_argument("codebook '" + A.name() + "' has no stored representation");
}

inline Codebook codebook_from_json(const json& j) {
    const auto id = j.at("id").get<std::string>();
    if (j.contains("matrix")) return Codebook::dense(detail::matrix_from_json(j.at("matrix")), id);
    require(id == "identity", "unknown codebook identifier without stored matrix");
    return Codebook::identity(j.at("cols").get<index_t>());
}

inline json to_json(const BlindConvOp& op) {
    return json{{"type", "blind_conv"}, {"mu", op.mu()}, {"m", op.m()}, {"n", op.n()},
                {"U", detail::matrix_to_json(op.U())}, {"codebook", to_json(op.codebook())}};
}

inline BlindConvOp blind_conv_from_json(const json& j) {
    require(j.at("type") == "blind_conv", "not a blind convolution operator");
    BlindConvOp op(detail::matrix_from_json(j.at("U")), codebook_from_json(j.at("codebook")));
    require(op.mu() == j.at("mu").get<index_t>() && op.m() == j.at("m").get<index_t>() &&
                op.n() == j.at("n").get<index_t>(),
            "operator dimensions disagree with stored matrices");
    return op;
}

inline json to_json(const DemixOp& op) {
    json users = json::array();
    for (const auto& u : op.users()) users.push_back(to_json(u));
    return json{{"type", "demix"}, {"M", op.M()}, {"N", op.N()}, {"D", detail::matrix_to_json(op.D())}, {"users", users}};
}

inline DemixOp demix_from_json(const json& j) {
    require(j.at("type") == "demix", "not a demixing operator");
    std::vector<BlindConvOp> users;
    for (const auto& u : j.at("users")) users.push_back(blind_conv_from_json(u));
    DemixOp op(detail::matrix_from_json(j.at("D")), std::move(users));
    require(op.M() == j.at("M").get<index_t>() && op.N() == j.at("N").get<index_t>(),
            "operator dimensions disagree with stored matrices");
    return op;
}

inline json to_json(const SolverConfig& c) {
    json j{{"step_size", c.step_size},   {"max_iters", c.max_iters},       {"support_stall_stop", c.support_stall_stop},
           {"ls_tol", c.ls_tol},         {"ls_max_iters", c.ls_max_iters}};
    if (c.rel_err_target) j["rel_err_target"] = *c.rel_err_target;
    return j;
}

/// Missing keys keep the values already in `base`.
inline SolverConfig solver_config_from_json(const json& j, SolverConfig base = {}) {
    base.step_size = j.value("step_size", base.step_size);
    base.max_iters = j.value("max_iters", base.max_iters);
    base.support_stall_stop = j.value("support_stall_stop", base.support_stall_stop);
    base.ls_tol = j.value("ls_tol", base.ls_tol);
    base.ls_max_iters = j.value("ls_max_iters", base.ls_max_iters);
    if (j.contains("rel_err_target")) base.rel_err_target = j.at("rel_err_target").get<double>();
    base.validate();
    return base;
}

inline json to_json(const SolveReport& r) {
    json history = json::array();
    for (const auto& s : r.support_history) history.push_back(to_json(s));
    json j{{"iterations", r.iterations},
           {"stop_reason", std::string(to_string(r.stop_reason))},
           {"ls_converged", r.ls_converged},
           {"residual_norms", r.residual_norms},
           {"support_history", history},
           {"estimate", to_json(r.estimate.data)}};
    if (r.estimate.support) j["estimate_support"] = to_json(*r.estimate.support);
    return j;
}

inline json to_json(const EnsembleSpec& e) {
    return json{{"mu", e.mu}, {"m", e.m}, {"n", e.n}, {"N", e.N}, {"M", e.M}, {"s", e.s}, {"sigma", e.sigma}, {"S", e.S},
                {"seed", e.seed}, {"codebook", e.codebook == CodebookKind::identity ? "identity" : "custom"}};
}

inline EnsembleSpec ensemble_spec_from_json(const json& j) {
    EnsembleSpec e;
    e.mu = j.at("mu").get<index_t>();
    e.n = j.at("n").get<index_t>();
    e.m = j.value("m", e.n);
    e.N = j.value("N", index_t{1});
    e.M = j.value("M", index_t{1});
    e.s = j.at("s").get<index_t>();
    e.sigma = j.at("sigma").get<index_t>();
    e.S = j.value("S", index_t{1});
    e.seed = j.value("seed", std::uint64_t{0});
    const auto kind = j.value("codebook", std::string("identity"));
    require(kind == "identity" || kind == "custom", "codebook must be 'identity' or 'custom'");
    e.codebook = kind == "identity" ? CodebookKind::identity : CodebookKind::custom;
    e.validate();
    return e;
}

}  // namespace hihtp

#endif  // HIHTP_SERIALIZE_HPP
