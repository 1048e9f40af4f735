#ifndef HIHTP_PROJECTION_HPP
#define HIHTP_PROJECTION_HPP

#include <algorithm>
#include <numeric>
#include <vector>

#include "hihtp/types.hpp"

namespace hihtp {

namespace detail {

// Strict total order "larger key first, lower index on ties". Keys are
// squared magnitudes so no square roots are taken.
inline auto larger_first(std::span<const double> keys) {
    return [keys](index_t a, index_t b) {
        const double ka = keys[static_cast<std::size_t>(a)];
        const double kb = keys[static_cast<std::size_t>(b)];
        return ka > kb || (ka == kb && a < b);
    };
}

// Indices of the `k` largest keys, ascending. Linear expected time.
inline std::vector<index_t> select_top(std::span<const double> keys, index_t k) {
    std::vector<index_t> idx(keys.size());
    std::iota(idx.begin(), idx.end(), index_t{0});
    if (k < static_cast<index_t>(idx.size())) {
        std::nth_element(idx.begin(), idx.begin() + k, idx.end(), larger_first(keys));
        idx.resize(static_cast<std::size_t>(k));
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct UserProjection {
    std::vector<BlockSupport> blocks;
    double score{0.0};
};

// Exact (s, sigma) projection of one user's blocks.
inline UserProjection project_user(const BlockVector& w, index_t user, index_t s, index_t sigma) {
    const auto& shape = w.shape();
    std::vector<double> sq(static_cast<std::size_t>(shape.entries));
    std::vector<std::vector<index_t>> kept(static_cast<std::size_t>(shape.blocks));
    std::vector<double> block_score(static_cast<std::size_t>(shape.blocks), 0.0);

    for (index_t k = 0; k < shape.blocks; ++k) {
        auto blk = w.block(user, k);
        for (std::size_t j = 0; j < blk.size(); ++j) sq[j] = blk[j] * blk[j];
        auto& keep = kept[static_cast<std::size_t>(k)];
        keep = select_top(sq, sigma);
        double score = 0.0;
        for (index_t j : keep) score += sq[static_cast<std::size_t>(j)];
        block_score[static_cast<std::size_t>(k)] = score;
    }

    UserProjection out;
    for (index_t k : select_top(block_score, s)) {
        out.score += block_score[static_cast<std::size_t>(k)];
        out.blocks.push_back(BlockSupport{user, k, std::move(kept[static_cast<std::size_t>(k)])});
    }
    return out;
}

}  // namespace detail

/// Zeroes every entry of `w` outside `support`.
inline HiSparseVector restrict(const BlockVector& w, const HiSupport& support) {
    support.validate(w.shape());
    BlockVector out(w.shape());
    for (const auto& b : support.blocks) {
        auto src = w.block(b.user, b.block);
        auto dst = out.block(b.user, b.block);
        for (index_t j : b.entries) dst[static_cast<std::size_t>(j)] = src[static_cast<std::size_t>(j)];
    }
    return {std::move(out), support};
}

/// Euclidean projection onto (s, sigma)-sparse two-level vectors.
///
/// Within each block the sigma largest-magnitude entries are kept; blocks are
/// then ranked by the squared norm of their kept entries and the s best
/// survive. Ties go to the lower index. The returned support lists every kept
/// position, including kept entries that happen to be zero.
inline HiSparseVector project_hisparse(const BlockVector& w, const SparsityLevels& levels) {
    require(w.shape().users == 1, "project_hisparse expects a two-level vector");
    SparsityLevels two{levels.s, levels.sigma, std::nullopt};
    two.validate(w.shape());
    HiSupport sup{2, detail::project_user(w, 0, levels.s, levels.sigma).blocks};
    return restrict(w, sup);
}

/// Euclidean projection onto (S, s, sigma)-sparse three-level vectors: each
/// user is projected to (s, sigma), users are ranked by the squared norm of
/// their projection and the S best survive.
inline HiSparseVector project_three_level(const BlockVector& w, const SparsityLevels& levels) {
    require(levels.S.has_value(), "project_three_level needs S");
    levels.validate(w.shape());
    const index_t users = w.shape().users;
    std::vector<detail::UserProjection> per_user;
    per_user.reserve(static_cast<std::size_t>(users));
    std::vector<double> scores(static_cast<std::size_t>(users));
    for (index_t u = 0; u < users; ++u) {
        per_user.push_back(detail::project_user(w, u, levels.s, levels.sigma));
        scores[static_cast<std::size_t>(u)] = per_user.back().score;
    }
    HiSupport sup{3, {}};
    for (index_t u : detail::select_top(scores, *levels.S)) {
        auto& blocks = per_user[static_cast<std::size_t>(u)].blocks;
        sup.blocks.insert(sup.blocks.end(), std::make_move_iterator(blocks.begin()),
                          std::make_move_iterator(blocks.end()));
    }
    return restrict(w, sup);
}

/// Dispatches on whether `levels` carries a user level.
inline HiSparseVector project(const BlockVector& w, const SparsityLevels& levels) {
    return levels.three_level() ? project_three_level(w, levels) : project_hisparse(w, levels);
}

/// True when `w` is already (s, sigma) or (S, s, sigma) sparse.
inline bool is_feasible(const BlockVector& w, const SparsityLevels& levels) {
    const auto& shape = w.shape();
    index_t active_users = 0;
    for (index_t u = 0; u < shape.users; ++u) {
        index_t active_blocks = 0;
        for (index_t k = 0; k < shape.blocks; ++k) {
            auto blk = w.block(u, k);
            const auto nnz = std::count_if(blk.begin(), blk.end(), [](double v) { return v != 0.0; });
            if (nnz > levels.sigma) return false;
            if (nnz > 0) ++active_blocks;
        }
        if (active_blocks > levels.s) return false;
        if (active_blocks > 0) ++active_users;
    }
    return levels.S ? active_users <= *levels.S : active_users <= 1;
}

}  // namespace hihtp

#endif  // HIHTP_PROJECTION_HPP
