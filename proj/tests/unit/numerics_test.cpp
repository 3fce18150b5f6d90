#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tsctm/numerics.hpp"

namespace tsctm {
namespace {

TEST(Softmax, UniformForEqualInputs) {
    const Vector p = softmax(Vector{0, 0, 0, 0});
    for (double x : p) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Softmax, LargeInputsDoNotOverflow) {
    const Vector p = softmax(Vector{1000, 0});
    EXPECT_NEAR(p[0], 1.0, 1e-12);
    EXPECT_NEAR(p[1], 0.0, 1e-12);
}

TEST(Softmax, ClosedFormLogWeights) {
    const Vector p = softmax(Vector{std::log(1.0), std::log(3.0)});
    EXPECT_NEAR(p[0], 0.25, 1e-15);
    EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, OnSimplexAndShiftInvariant) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Vector v(1 + rng.below(12));
        for (double& x : v) x = rng.uniform(-30, 30);
        const Vector p = softmax(v);
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
        for (double x : p) EXPECT_GE(x, 0.0);
        Vector shifted = v;
        const double c = rng.uniform(-100, 100);
        for (double& x : shifted) x += c;
        const Vector q = softmax(shifted);
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
    }
}

TEST(LogSoftmax, MatchesLogOfSoftmax) {
    const Vector v{0.3, -1.2, 2.5, 0.0};
    const Vector p = softmax(v);
    const Vector lp = log_softmax(v);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(lp[i], std::log(p[i]), 1e-14);
    EXPECT_NEAR(log_sum_exp(v), std::log(std::exp(0.3) + std::exp(-1.2) + std::exp(2.5) + 1.0),
                1e-14);
}

TEST(Softplus, Values) {
    EXPECT_DOUBLE_EQ(softplus(0.0), 0.6931471805599453);
    EXPECT_NEAR(softplus(50.0), 50.0, 1e-12);
    const double tiny = softplus(-50.0);
    EXPECT_GT(tiny, 0.0);
    EXPECT_NEAR(tiny, 1.9287498479639178e-22, 1e-30);
}

TEST(Softplus, MonotonePositiveAndAsymptotic) {
    double prev = softplus(-40.0);
    for (double x = -39.5; x <= 40.0; x += 0.5) {
        const double y = softplus(x);
        EXPECT_GT(y, 0.0);
        EXPECT_GT(y, prev);
        prev = y;
    }
    EXPECT_LT(softplus(40.0) - 40.0, 1e-15);
}

TEST(Softplus, DerivativeIsSigmoid) {
    for (double x : {-5.0, -0.3, 0.0, 1.7, 8.0}) {
        const double h = 1e-6;
        EXPECT_NEAR((softplus(x + h) - softplus(x - h)) / (2 * h), sigmoid(x), 1e-9);
    }
}

TEST(Kernels, DotNormAndMatvec) {
    const Vector a{1, 2, 3, 4, 5}, b{5, 4, 3, 2, 1};
    EXPECT_DOUBLE_EQ(dot(a, b), 35.0);
    EXPECT_DOUBLE_EQ(norm2(Vector{3, 4}), 5.0);
    EXPECT_DOUBLE_EQ(squared_distance(a, b), 40.0);

    Matrix m(2, 3);
    double c = 1;
    for (double& x : m.values()) x = c++;
    EXPECT_EQ(matvec(m, Vector{1, 0, -1}), (Vector{-2, -2}));
    EXPECT_EQ(matvec_transposed(m, Vector{1, 1}), (Vector{5, 7, 9}));
    EXPECT_EQ(Matrix::identity(2), [] {
        Matrix i(2, 2);
        i(0, 0) = i(1, 1) = 1;
        return i;
    }());
}

TEST(Rng, DeterministicAndSeedSensitive) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        differs |= x != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, RangesAndShuffle) {
    Rng rng(9);
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ++hist[rng.below(7)];
    }
    for (int h : hist) EXPECT_GT(h, 800);
    std::vector<int> items(50);
    std::iota(items.begin(), items.end(), 0);
    rng.shuffle(items);
    std::vector<int> sorted = items;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Adam, FirstStepClosedForm) {
    Vector p{0.0};
    const Vector g{1.0};
    AdamState state({0.002}, {1});
    std::vector<std::span<double>> params{p};
    std::vector<std::span<const double>> grads{g};
    adam_step(params, grads, state);
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    EXPECT_NEAR(p[0], -0.002 * 1.0 / (1.0 + 1e-8), 1e-18);
    EXPECT_EQ(state.t, 1u);
}

TEST(Adam, ZeroGradientLeavesParams) {
    Vector p{1.5, -2.0};
    const Vector g{0.0, 0.0};
    AdamState state({}, {2});
    std::vector<std::span<double>> params{p};
    std::vector<std::span<const double>> grads{g};
    for (int i = 0; i < 3; ++i) adam_step(params, grads, state);
    EXPECT_EQ(p, (Vector{1.5, -2.0}));
}

TEST(Adam, Deterministic) {
    auto run = [] {
        Vector p{0.1, 0.2, 0.3};
        AdamState state({}, {3});
        std::vector<std::span<double>> params{p};
        for (int i = 0; i < 5; ++i) {
            const Vector g{0.5 * i, -1.0, 0.25};
            std::vector<std::span<const double>> grads{g};
            adam_step(params, grads, state);
        }
        return std::make_pair(p, state);
    };
    const auto a = run();
    const auto b = run();
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Adam, ShapeMismatchThrows) {
    Vector p{0.0, 0.0};
    const Vector g{1.0};
    AdamState state({}, {2});
    std::vector<std::span<double>> params{p};
    std::vector<std::span<const double>> grads{g};
    EXPECT_THROW(adam_step(params, grads, state), std::invalid_argument);
}

TEST(FiniteDifference, ExactOnQuadraticsAndBilinear) {
    const Vector g1 = fd_gradient([](std::span<const double> x) { return x[0] * x[0]; },
                                  Vector{3.0}, 1e-5);
    EXPECT_NEAR(g1[0], 6.0, 1e-8);
    const Vector g2 =
        fd_gradient([](std::span<const double>) { return 4.0; }, Vector{1.0, 2.0}, 1e-5);
    EXPECT_EQ(g2, (Vector{0.0, 0.0}));
    const Vector g3 = fd_gradient([](std::span<const double> x) { return x[0] * x[1]; },
                                  Vector{2.0, 5.0}, 1e-5);
    EXPECT_NEAR(g3[0], 5.0, 1e-8);
    EXPECT_NEAR(g3[1], 2.0, 1e-8);
}

TEST(FiniteDifference, RelativeErrorFloor) {
    EXPECT_NEAR(max_relative_error(Vector{1.0, 0.0}, Vector{1.1, 0.0}, 1e-3), 0.1 / 1.1, 1e-15);
    EXPECT_DOUBLE_EQ(max_relative_error(Vector{1e-9}, Vector{0.0}, 1e-3), 1e-6);
}

}  // namespace
}  // namespace tsctm
