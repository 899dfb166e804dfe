#include <gtest/gtest.h>

#include "martkit/als_engine.hpp"
#include "test_support.hpp"

using namespace martkit;
using martkit::testing::random_matrix;

namespace {

Matrix brute_rows(const Matrix& s, const Matrix& w, Eigen::Index m, Eigen::Index n) {
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l)
            for (Eigen::Index p = 0; p < m; ++p)
                for (Eigen::Index q = 0; q < m; ++q) out(k, l) += w(p, q) * s(p + m * k, q + m * l);
    return out;
}

Matrix brute_cols(const Matrix& s, const Matrix& w, Eigen::Index m, Eigen::Index n) {
    Matrix out = Matrix::Zero(m, m);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l)
            for (Eigen::Index p = 0; p < m; ++p)
                for (Eigen::Index q = 0; q < m; ++q) out(p, q) += w(k, l) * s(p + m * k, q + m * l);
    return out;
}

}  // namespace

TEST(AlsEngine, ContractionsMatchDefinition) {
    Rng rng(21);
    const Eigen::Index m = 3, n = 2;
    const Matrix s = random_matrix(m * n, m * n, rng);
    const Matrix wm = random_matrix(m, m, rng);
    const Matrix wn = random_matrix(n, n, rng);
    EXPECT_LT((contract_rows(s, wm, m, n) - brute_rows(s, wm, m, n)).norm(), 1e-12);
    EXPECT_LT((contract_cols(s, wn, m, n) - brute_cols(s, wn, m, n)).norm(), 1e-12);
}

TEST(AlsEngine, MomentSseMatchesDirectSum) {
    Rng rng(8);
    std::vector<Matrix> x;
    for (int t = 0; t < 80; ++t) x.push_back(random_matrix(3, 2, rng));
    const auto series = make_endogenous_series(x);
    ThetaParams theta{martkit::testing::random_coefs(3, 2, rng), {0.0, 0.1}};
    const auto moments = accumulate_moments(series, 4, [&](std::size_t t) {
        return quadrant_index(classify_regime(series.z[t - 1], series.w[t - 1], theta.tau));
    });
    const BilinearCoefs c{{theta.coefs.a1, theta.coefs.a2}, {theta.coefs.b1, theta.coefs.b2}};
    const double expected = martkit::testing::direct_sse(series, theta);
    EXPECT_NEAR(moment_sse(moments, RegimeLayout::two_way(), c), expected, 1e-9 * expected);
}

TEST(AlsEngine, RecoversNoiseFreeSingleRegime) {
    Rng rng(30);
    const Matrix a = random_matrix(3, 3, rng);
    const Matrix b = random_matrix(2, 2, rng);
    // Rescale so the recursion neither explodes nor dies out.
    const double na = Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
    const double nb = Eigen::JacobiSVD<Matrix>(b).singularValues()(0);
    const Matrix as = a / na, bs = b / nb * 0.999;
    std::vector<Matrix> x{random_matrix(3, 2, rng)};
    RegimeMoments mo(6);
    for (int t = 1; t < 60; ++t) {
        // Fresh excitation keeps the regressors full rank.
        x.push_back(as * x.back() * bs.transpose() + (t % 7 == 0 ? random_matrix(3, 2, rng)
                                                                 : Matrix::Zero(3, 2)));
        if (t % 7 != 0) mo.add(vec(x[t - 1]), vec(x[t]));
    }
    BilinearCoefs init{{Matrix::Identity(3, 3)}, {Matrix::Identity(2, 2)}};
    AlsControl ctl;
    ctl.max_iters = 500;
    const auto out = run_als({mo}, RegimeLayout::per_regime(1), init, ctl, 1.0);
    EXPECT_LT((kron(out.coefs.b[0], out.coefs.a[0]) - kron(bs, as)).norm(), 1e-7);
    EXPECT_NEAR(out.coefs.a[0].norm(), 1.0, 1e-12);
    for (std::size_t k = 1; k < out.loss_trace.size(); ++k)
        EXPECT_LE(out.loss_trace[k], out.loss_trace[k - 1] * (1 + 1e-12) + 1e-14);
}

TEST(AlsEngine, LossTraceNonIncreasingWithNoise) {
    Rng rng(44);
    std::vector<Matrix> x;
    for (int t = 0; t < 200; ++t) x.push_back(random_matrix(3, 2, rng));
    const auto series = make_endogenous_series(x);
    const auto moments = accumulate_moments(series, 4, [&](std::size_t t) {
        return quadrant_index(classify_regime(series.z[t - 1], series.w[t - 1], {0.0, 0.0}));
    });
    BilinearCoefs init{{random_matrix(3, 3, rng), random_matrix(3, 3, rng)},
                       {random_matrix(2, 2, rng), random_matrix(2, 2, rng)}};
    const auto out = run_als(moments, RegimeLayout::two_way(), init, AlsControl{}, 1.0 / 200);
    ASSERT_GE(out.loss_trace.size(), 2u);
    for (std::size_t k = 1; k < out.loss_trace.size(); ++k)
        EXPECT_LE(out.loss_trace[k], out.loss_trace[k - 1] * (1 + 1e-12));
    EXPECT_TRUE(out.converged);
    EXPECT_NEAR(out.loss, moment_sse(moments, RegimeLayout::two_way(), out.coefs) / 200, 1e-10);
}

TEST(AlsEngine, EmptyRegimeIsHeld) {
    Rng rng(5);
    std::vector<RegimeMoments> moments(4, RegimeMoments(4));
    for (int t = 0; t < 30; ++t) {
        moments[0].add(random_matrix(4, 1, rng), random_matrix(4, 1, rng));
        moments[2].add(random_matrix(4, 1, rng), random_matrix(4, 1, rng));
    }
    BilinearCoefs init{{Matrix::Identity(2, 2), Matrix::Identity(2, 2)},
                       {Matrix::Identity(2, 2), 3.0 * Matrix::Identity(2, 2)}};
    const auto out = run_als(moments, RegimeLayout::two_way(), init, AlsControl{}, 1.0);
    EXPECT_TRUE(out.b_held[1]);
    EXPECT_FALSE(out.b_held[0]);
    EXPECT_EQ(out.coefs.b[1], 3.0 * Matrix::Identity(2, 2));
}

TEST(AlsEngine, NormalizeComponentsPreservesProducts) {
    Rng rng(6);
    std::vector<RegimeMoments> moments(4, RegimeMoments(4));
    moments[0].count = 1;
    moments[3].count = 1;  // (1,1) and (2,2) only: two separate components
    BilinearCoefs c{{random_matrix(2, 2, rng), random_matrix(2, 2, rng)},
                    {random_matrix(2, 2, rng), random_matrix(2, 2, rng)}};
    const BilinearCoefs before = c;
    normalize_components(c, RegimeLayout::two_way(), moments);
    EXPECT_NEAR(c.a[0].norm(), 1.0, 1e-14);
    EXPECT_NEAR(c.a[1].norm(), 1.0, 1e-14);
    EXPECT_GE(c.b[0](0, 0), 0.0);
    EXPECT_GE(c.b[1](0, 0), 0.0);
    EXPECT_LT((kron(c.b[0], c.a[0]) - kron(before.b[0], before.a[0])).norm(), 1e-12);
    EXPECT_LT((kron(c.b[1], c.a[1]) - kron(before.b[1], before.a[1])).norm(), 1e-12);
}

TEST(AlsEngine, SolveGramFallsBackToRidge) {
    Matrix g = Matrix::Zero(2, 2);
    g(0, 0) = 1.0;
    Matrix num(1, 2);
    num << 2.0, 0.0;
    bool ridge = false;
    const Matrix x = solve_gram(num, g, ridge);
    EXPECT_TRUE(ridge);
    EXPECT_NEAR(x(0, 0), 2.0, 1e-6);
    EXPECT_NEAR(x(0, 1), 0.0, 1e-12);

    ridge = false;
    solve_gram(num, Matrix::Identity(2, 2), ridge);
    EXPECT_FALSE(ridge);
}
