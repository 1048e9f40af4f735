#ifndef HIHTP_TYPES_HPP
#define HIHTP_TYPES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hihtp {

using index_t = std::ptrdiff_t;

/// Shape of a (possibly three-level) block vector: `users` outer blocks,
/// each holding `blocks` inner blocks of `entries` reals. Two-level vectors
/// have users == 1.
struct BlockShape {
    index_t users{1};
    index_t blocks{1};
    index_t entries{1};

    index_t size() const noexcept { return users * blocks * entries; }
    index_t offset(index_t user, index_t block, index_t entry) const noexcept {
        return (user * blocks + block) * entries + entry;
    }
    friend bool operator==(const BlockShape&, const BlockShape&) = default;
};

inline void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}
inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

/// Hierarchical sparsity levels: at most `s` active blocks with at most `sigma`
/// entries each; `S` (three-level only) bounds the number of active users.
struct SparsityLevels {
    index_t s{1};
    index_t sigma{1};
    std::optional<index_t> S{};

    bool three_level() const noexcept { return S.has_value(); }

    void validate(const BlockShape& shape) const {
        require(s >= 1 && sigma >= 1, "sparsity levels must be positive");
        require(s <= shape.blocks, "s exceeds the number of blocks");
        require(sigma <= shape.entries, "sigma exceeds the block length");
        if (S) {
            require(*S >= 1, "S must be positive");
            require(*S <= shape.users, "S exceeds the number of users");
        } else {
            require(shape.users == 1, "multi-user vector needs a user-level sparsity S");
        }
    }
};

/// One active inner block and its active entries, both sorted ascending.
struct BlockSupport {
    index_t user{0};
    index_t block{0};
    std::vector<index_t> entries;

    friend bool operator==(const BlockSupport&, const BlockSupport&) = default;
};

/// Nested support pattern. Blocks are ordered by (user, block).
struct HiSupport {
    int depth{2};
    std::vector<BlockSupport> blocks;

    index_t cardinality() const noexcept {
        index_t c = 0;
        for (const auto& b : blocks) c += static_cast<index_t>(b.entries.size());
        return c;
    }

    index_t active_users() const noexcept {
        index_t c = 0;
        for (std::size_t i = 0; i < blocks.size(); ++i)
            if (i == 0 || blocks[i].user != blocks[i - 1].user) ++c;
        return c;
    }

    bool contains(index_t user, index_t block, index_t entry) const {
        for (const auto& b : blocks) {
            if (b.user == user && b.block == block)
                return std::binary_search(b.entries.begin(), b.entries.end(), entry);
        }
        return false;
    }

    /// Throws if the pattern is unordered, out of range for `shape`, or
    /// exceeds `levels` (when given).
    void validate(const BlockShape& shape, const SparsityLevels* levels = nullptr) const {
        require(depth == 2 || depth == 3, "support depth must be 2 or 3");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const auto& b = blocks[i];
            require(b.user >= 0 && b.user < shape.users, "support user index out of range");
            require(b.block >= 0 && b.block < shape.blocks, "support block index out of range");
            if (i > 0) {
                const auto& p = blocks[i - 1];
                require(p.user < b.user || (p.user == b.user && p.block < b.block),
                        "support blocks must be strictly increasing");
            }
            for (std::size_t j = 0; j < b.entries.size(); ++j) {
                require(b.entries[j] >= 0 && b.entries[j] < shape.entries,
                        "support entry index out of range");
                if (j > 0) require(b.entries[j - 1] < b.entries[j], "support entries must be strictly increasing");
            }
            if (levels) require(static_cast<index_t>(b.entries.size()) <= levels->sigma, "block exceeds sigma");
        }
        if (!levels) return;
        if (depth == 2) {
            require(static_cast<index_t>(blocks.size()) <= levels->s, "support exceeds s blocks");
            return;
        }
        require(levels->S.has_value(), "three-level support needs S");
        require(active_users() <= *levels->S, "support exceeds S users");
        std::size_t i = 0;
        while (i < blocks.size()) {
            std::size_t j = i;
            while (j < blocks.size() && blocks[j].user == blocks[i].user) ++j;
            require(static_cast<index_t>(j - i) <= levels->s, "user exceeds s blocks");
            i = j;
        }
    }

    friend bool operator==(const HiSupport&, const HiSupport&) = default;

    /// Every position of `shape`.
    static HiSupport full(const BlockShape& shape) {
        HiSupport sup;
        sup.depth = shape.users > 1 ? 3 : 2;
        for (index_t u = 0; u < shape.users; ++u)
            for (index_t k = 0; k < shape.blocks; ++k) {
                BlockSupport b{u, k, {}};
                b.entries.resize(static_cast<std::size_t>(shape.entries));
                for (index_t j = 0; j < shape.entries; ++j) b.entries[static_cast<std::size_t>(j)] = j;
                sup.blocks.push_back(std::move(b));
            }
        return sup;
    }
};

/// Dense real block vector laid out user-major, then block, then entry.
class BlockVector {
public:
    BlockVector() = default;
    explicit BlockVector(BlockShape shape)
        : shape_(shape), data_(static_cast<std::size_t>(shape.size()), 0.0) {
        require(shape.users >= 1 && shape.blocks >= 1 && shape.entries >= 1, "block shape must be positive");
    }
    BlockVector(BlockShape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        require(static_cast<index_t>(data_.size()) == shape.size(), "data size does not match block shape");
    }
    /// Two-level convenience: `blocks` given as a list of equal-length rows.
    static BlockVector from_blocks(const std::vector<std::vector<double>>& blocks) {
        require(!blocks.empty() && !blocks.front().empty(), "empty block list");
        BlockShape shape{1, static_cast<index_t>(blocks.size()), static_cast<index_t>(blocks.front().size())};
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(shape.size()));
        for (const auto& b : blocks) {
            require(static_cast<index_t>(b.size()) == shape.entries, "ragged block list");
            data.insert(data.end(), b.begin(), b.end());
        }
        return BlockVector(shape, std::move(data));
    }
    /// Lifted tensor h (x) b as a two-level block vector.
    static BlockVector outer(std::span<const double> h, std::span<const double> b) {
        BlockVector w(BlockShape{1, static_cast<index_t>(h.size()), static_cast<index_t>(b.size())});
        for (std::size_t k = 0; k < h.size(); ++k)
            for (std::size_t j = 0; j < b.size(); ++j) w.data_[k * b.size() + j] = h[k] * b[j];
        return w;
    }

    const BlockShape& shape() const noexcept { return shape_; }
    index_t size() const noexcept { return shape_.size(); }

    double& operator()(index_t user, index_t block, index_t entry) {
        return data_[static_cast<std::size_t>(shape_.offset(user, block, entry))];
    }
    double operator()(index_t user, index_t block, index_t entry) const {
        return data_[static_cast<std::size_t>(shape_.offset(user, block, entry))];
    }
    double& operator()(index_t block, index_t entry) { return (*this)(0, block, entry); }
    double operator()(index_t block, index_t entry) const { return (*this)(0, block, entry); }

    std::span<double> block(index_t user, index_t k) {
        return {data_.data() + shape_.offset(user, k, 0), static_cast<std::size_t>(shape_.entries)};
    }
    std::span<const double> block(index_t user, index_t k) const {
        return {data_.data() + shape_.offset(user, k, 0), static_cast<std::size_t>(shape_.entries)};
    }
    /// All inner blocks of one user, contiguous.
    std::span<const double> user_data(index_t user) const {
        return {data_.data() + shape_.offset(user, 0, 0), static_cast<std::size_t>(shape_.blocks * shape_.entries)};
    }
    std::span<double> user_data(index_t user) {
        return {data_.data() + shape_.offset(user, 0, 0), static_cast<std::size_t>(shape_.blocks * shape_.entries)};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double squared_norm() const noexcept {
        double acc = 0.0;
        for (double v : data_) acc += v * v;
        return acc;
    }
    double norm() const noexcept { return std::sqrt(squared_norm()); }

    bool is_zero() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
    }

    BlockVector& operator+=(const BlockVector& o) {
        require(shape_ == o.shape_, "block shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    BlockVector& operator-=(const BlockVector& o) {
        require(shape_ == o.shape_, "block shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    BlockVector& operator*=(double c) noexcept {
        for (double& v : data_) v *= c;
        return *this;
    }
    friend BlockVector operator+(BlockVector a, const BlockVector& b) { return a += b; }
    friend BlockVector operator-(BlockVector a, const BlockVector& b) { return a -= b; }
    friend BlockVector operator*(double c, BlockVector a) { return a *= c; }

    friend bool operator==(const BlockVector&, const BlockVector&) = default;

private:
    BlockShape shape_{};
    std::vector<double> data_;
};

inline double dot(const BlockVector& a, const BlockVector& b) {
    require(a.shape() == b.shape(), "block shape mismatch");
    double acc = 0.0;
    auto x = a.values();
    auto y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

/// Block vector with the support it is known to live on (when known).
struct HiSparseVector {
    BlockVector data;
    std::optional<HiSupport> support;

    const BlockShape& shape() const noexcept { return data.shape(); }
    double norm() const noexcept { return data.norm(); }
};

}  // namespace hihtp

#endif  // HIHTP_TYPES_HPP
