#include <set>

#include <gtest/gtest.h>

#include "hihtp/ensembles.hpp"
#include "oracles.hpp"

using namespace hihtp;

TEST(DeriveKey, DistinctPartsGiveDistinctKeys) {
    std::set<std::uint64_t> keys;
    for (std::uint64_t a = 0; a < 20; ++a)
        for (std::uint64_t b = 0; b < 20; ++b) keys.insert(derive_key(7, {a, b}));
    EXPECT_EQ(keys.size(), 400u);
    EXPECT_NE(derive_key(7, {1, 2}), derive_key(7, {2, 1}));
    EXPECT_NE(derive_key(7, {1}), derive_key(8, {1}));
    EXPECT_EQ(derive_key(7, {3, 4}), derive_key(7, {3, 4}));
    EXPECT_NE(stream_key(9, Stream::filter), stream_key(9, Stream::message));
}

TEST(GenU, DeterministicAndScaled) {
    EXPECT_EQ(gen_U(8, 5, 42), gen_U(8, 5, 42));
    EXPECT_NE(gen_U(8, 5, 42), gen_U(8, 5, 43));
    const index_t mu = 256;
    const Eigen::MatrixXd U = gen_U(mu, 256, 1);
    const double mean = U.mean();
    const double var = (U.array() - mean).square().sum() / static_cast<double>(U.size() - 1);
    EXPECT_NEAR(var, 1.0 / mu, 0.1 / mu);
    EXPECT_THROW(gen_U(0, 3, 1), std::invalid_argument);
}

TEST(GenMessage, RademacherOnRandomSupport) {
    const auto full = gen_message(6, 6, 3);
    for (double v : full) EXPECT_EQ(std::abs(v), 1.0);

    std::vector<int> hits(10, 0);
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        const auto b = gen_message(10, 3, derive_key(11, {static_cast<std::uint64_t>(d)}));
        double sq = 0;
        int nnz = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            sq += b[j] * b[j];
            if (b[j] != 0.0) {
                ++nnz;
                ++hits[j];
                ASSERT_EQ(std::abs(b[j]), 1.0);
            }
        }
        ASSERT_EQ(sq, 3.0);
        ASSERT_EQ(nnz, 3);
    }
    for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / draws, 0.3, 0.02);
    EXPECT_EQ(gen_message(10, 3, 5), gen_message(10, 3, 5));
    EXPECT_THROW(gen_message(3, 4, 1), std::invalid_argument);
}

TEST(GenFilter, SparseGaussian) {
    const auto dense = gen_filter(9, 9, 4);
    for (double v : dense) EXPECT_NE(v, 0.0);

    double sum = 0, sum_sq = 0;
    int count = 0;
    for (int d = 0; d < 10000; ++d) {
        const auto h = gen_filter(10, 3, derive_key(12, {static_cast<std::uint64_t>(d)}));
        int nnz = 0;
        for (double v : h)
            if (v != 0.0) {
                ++nnz;
                sum += v;
                sum_sq += v * v;
                ++count;
            }
        ASSERT_EQ(nnz, 3);
    }
    const double mean = sum / count;
    const double var = (sum_sq - count * mean * mean) / (count - 1);
    EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(GenMixing, ShapeActiveSetAndNorms) {
    const auto a = gen_mixing(4, 6, 2, 9);
    const auto b = gen_mixing(4, 6, 2, 9);
    EXPECT_EQ(a.D, b.D);
    EXPECT_EQ(a.active, b.active);
    EXPECT_EQ(a.D.rows(), 4);
    EXPECT_EQ(a.D.cols(), 6);
    for (std::uint64_t d = 0; d < 50; ++d) {
        const auto m = gen_mixing(3, 8, 3, d);
        ASSERT_EQ(m.active.size(), 3u);
        EXPECT_TRUE(std::is_sorted(m.active.begin(), m.active.end()));
        EXPECT_EQ(std::set<index_t>(m.active.begin(), m.active.end()).size(), 3u);
        // The active set does not depend on the number of antennas.
        EXPECT_EQ(gen_mixing(17, 8, 3, d).active, m.active);
    }
    for (std::uint64_t d = 0; d < 100; ++d) {
        const auto m = gen_mixing(256, 4, 1, derive_key(13, {d}));
        for (index_t i = 0; i < 4; ++i) EXPECT_NEAR(m.D.col(i).squaredNorm(), 1.0, 0.5);
    }
    EXPECT_THROW(gen_mixing(0, 3, 1, 1), std::invalid_argument);
    EXPECT_THROW(gen_mixing(2, 3, 4, 1), std::invalid_argument);
}

TEST(RandomHiSparseUnit, CardinalitiesAndNorm) {
    for (std::uint64_t d = 0; d < 50; ++d) {
        const auto u = random_hisparse_unit({3, 8, 5}, SparsityLevels{2, 3, 2}, d);
        EXPECT_NEAR(u.norm(), 1.0, 1e-14);
        const auto p = project(u, SparsityLevels{2, 3, 2});
        EXPECT_EQ(p.data, u);
    }
}

TEST(EstimateHiRip, ZeroOnIsometry) {
    std::mt19937_64 rng(14);
    const BlockShape shape{1, 4, 5};
    const Eigen::MatrixXd G = oracle::gaussian(30, 20, rng);
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ() * Eigen::MatrixXd::Identity(30, 20);
    const DenseOperator op(shape, Q);
    const auto est = estimate_hirip(op, SparsityLevels{2, 2, std::nullopt}, 500, 3);
    EXPECT_LE(est.delta_lower, 1e-12);
}

TEST(EstimateHiRip, MonotoneAndWitnessReproduces) {
    BlindConvOp op(gen_U(32, 8, 21));
    const SparsityLevels levels{2, 2, std::nullopt};
    double prev = 0;
    for (index_t trials : {1, 5, 20, 100, 400}) {
        const auto est = estimate_hirip(op, levels, trials, 77);
        EXPECT_GE(est.delta_lower, prev);
        EXPECT_GE(est.delta_lower, 0.0);
        EXPECT_EQ(est.trials, trials);
        EXPECT_NEAR(std::abs(op.apply(est.max_witness).squaredNorm() - 1.0), est.delta_lower, 1e-12);
        EXPECT_TRUE(is_feasible(est.max_witness, levels));
        prev = est.delta_lower;
    }
    EXPECT_THROW(estimate_hirip(op, levels, 0, 1), std::invalid_argument);
}
