#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "reference.hpp"
#include "retmil/error.hpp"
#include "retmil/ops.hpp"
#include "retmil/pooling.hpp"
#include "test_support.hpp"

using namespace retmil;
using test_util::random_tensor;
using T64 = Tensor<double>;

namespace {

GatedPoolParams<double> make_pool(std::size_t d, std::size_t m, ParamStore<double>& store, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return GatedPoolParams<double>::create(d, m, store, "p", rng);
}

}  // namespace

TEST(GatedPool, Shapes) {
    ParamStore<double> store;
    const auto p = make_pool(8, 5, store, 1);
    EXPECT_EQ(p.gamma.shape(), (Shape{1, 5}));
    EXPECT_EQ(p.w.shape(), (Shape{5, 8}));
    EXPECT_EQ(p.u.shape(), (Shape{5, 8}));
    EXPECT_EQ(store.size(), 3u);
}

TEST(GatedPool, SingletonWeightIsOne) {
    ParamStore<double> store;
    const auto p = make_pool(4, 3, store, 2);
    std::mt19937_64 rng(3);
    const auto f = random_tensor({1, 4}, rng);
    const auto r = pool(f, p);
    EXPECT_EQ(r.weights.to_vector(), std::vector<double>{1.0});
    EXPECT_EQ(r.feature.to_vector(), f.to_vector());
}

TEST(GatedPool, IdenticalRowsShareWeight) {
    ParamStore<double> store;
    const auto p = make_pool(4, 3, store, 4);
    const auto f = T64::from({2, 4}, {0.3, -1, 2, 0.5, 0.3, -1, 2, 0.5});
    const auto w = gated_attention_weights(f, p);
    EXPECT_EQ(w.at(0), 0.5);
    EXPECT_EQ(w.at(1), 0.5);
}

TEST(GatedPool, EmptyInputAndWidthMismatch) {
    ParamStore<double> store;
    const auto p = make_pool(4, 3, store, 5);
    EXPECT_THROW(gated_attention_weights(T64::zeros({0, 4}), p), InputError);
    EXPECT_THROW(gated_attention_weights(T64::zeros({2, 3}), p), ConfigError);
}

TEST(GatedPool, MatchesScalarReference) {
    ParamStore<double> store;
    const auto p = make_pool(8, 5, store, 6);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = random_tensor({4, 8}, rng, 2.0);
        const auto want = reference::pool_weights(p, reference::to_mat(f));
        const auto got = gated_attention_weights(f, p);
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(got.at(k), want[k], 1e-10);
    }
}

TEST(GatedPool, WeightsAreProbabilities) {
    ParamStore<double> store;
    const auto p = make_pool(6, 7, store, 8);
    std::mt19937_64 rng(9);
    for (std::size_t n : {1u, 2u, 5u, 64u, 300u}) {
        const auto w = gated_attention_weights(random_tensor({n, 6}, rng, 3.0), p);
        double total = 0.0;
        for (double v : w.values()) {
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
            if (n > 1) EXPECT_LT(v, 1.0);
            total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-6);
    }
}

TEST(GatedPool, AllRowsEqualGivesThatRow) {
    ParamStore<double> store;
    const auto p = make_pool(5, 4, store, 10);
    const std::vector<double> v{0.25, -1.5, 3.0, 0.125, -0.75};
    Buffer<double> rows;
    for (int k = 0; k < 9; ++k) rows.insert(rows.end(), v.begin(), v.end());
    const auto r = pool(T64::from({9, 5}, std::move(rows)), p);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(r.feature.at(j), v[j], 1e-12 * std::abs(v[j]));
}

TEST(GatedPool, FeatureInConvexHull) {
    ParamStore<double> store;
    const auto p = make_pool(6, 4, store, 11);
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = random_tensor({7, 6}, rng);
        const auto r = pool(f, p);
        for (std::size_t j = 0; j < 6; ++j) {
            double lo = f.at(0, j), hi = f.at(0, j);
            for (std::size_t k = 1; k < 7; ++k) {
                lo = std::min(lo, f.at(k, j));
                hi = std::max(hi, f.at(k, j));
            }
            EXPECT_GE(r.feature.at(j), lo);
            EXPECT_LE(r.feature.at(j), hi);
        }
    }
}

TEST(GatedPool, PermutationEquivariance) {
    ParamStore<double> store;
    const auto p = make_pool(6, 4, store, 13);
    std::mt19937_64 rng(14);
    const auto f = random_tensor({8, 6}, rng);
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Buffer<double> shuffled;
    for (std::size_t k : perm) {
        for (std::size_t j = 0; j < 6; ++j) shuffled.push_back(f.at(k, j));
    }
    const auto a = pool(f, p);
    const auto b = pool(T64::from({8, 6}, std::move(shuffled)), p);
    // Scores are computed per row, so they permute exactly; the softmax and
    // weighted sums change only by summation order.
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(b.weights.at(i), a.weights.at(perm[i]), 1e-15);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(b.feature.at(j), a.feature.at(j), 1e-12);
}

TEST(GatedPool, GradientOfSquaredNorm) {
    ParamStore<double> store;
    const auto p = make_pool(5, 4, store, 15);
    std::mt19937_64 rng(16);
    auto f = random_tensor({6, 5}, rng, 1.0, true);
    auto sq = [&] {
        const auto r = pool(f, p);
        return sum(mul(r.feature, r.feature));
    };
    EXPECT_LT(test_util::grad_check(sq, {f}, 1e-6), 1e-4);
    const auto res = finite_diff_check<double>([&](ParamStore<double>&) { return sq(); }, store, 1e-5);
    EXPECT_LT(res.max_relative_error, 1e-4) << res.worst_parameter;
}
