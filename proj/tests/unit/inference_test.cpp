#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "martkit/inference.hpp"
#include "martkit/simulate.hpp"
#include "martkit/stats.hpp"
#include "test_support.hpp"

using namespace martkit;
using martkit::testing::random_coefs;
using martkit::testing::random_matrix;

namespace {

MatrixSeries setting_one(std::size_t length, std::uint64_t seed) {
    DgpSpec spec;
    spec.theta = design_dgp(3, 2);
    spec.noise.seed = seed;
    spec.length = length;
    return simulate_2mart(spec);
}

// Brute force: fixed long horizon, every level listed explicitly.
double brute_argmin(const std::vector<double>& right, const std::vector<double>& left, double rate,
                    Rng& rng, int horizon) {
    std::exponential_distribution<double> gap(rate);
    std::uniform_int_distribution<std::size_t> pick_r(0, right.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_l(0, left.size() - 1);
    struct Piece {
        double left_end, level;
    };
    std::vector<Piece> pieces;
    std::vector<double> lt(horizon + 1), ll(horizon + 1);
    double t = 0.0, lev = 0.0;
    for (int k = 1; k <= horizon; ++k) {
        t += gap(rng);
        lt[k] = t;
    }
    for (int k = 1; k <= horizon; ++k) {
        ll[k - 1] = lev;
        lev += left[pick_l(rng)];
    }
    // Level ll[k] on [-lt[k+1], -lt[k]); level 0 is ll[0] on [-lt[1], ...).
    for (int k = 0; k < horizon; ++k) pieces.push_back({-lt[k + 1], ll[k]});
    t = 0.0;
    lev = 0.0;
    for (int k = 1; k <= horizon; ++k) {
        t += gap(rng);
        lev += right[pick_r(rng)];
        pieces.push_back({t, lev});
    }
    std::sort(pieces.begin(), pieces.end(),
              [](const Piece& a, const Piece& b) { return a.left_end < b.left_end; });
    Piece best = pieces.front();
    for (const auto& p : pieces)
        if (p.level < best.level) best = p;
    return best.left_end;
}

WeightedSample unweighted(std::vector<double> v) {
    WeightedSample s;
    s.weights.assign(v.size(), 1.0);
    s.values = std::move(v);
    return s;
}

}  // namespace

TEST(Inference, SigmaOfZeroResidualsIsZero) {
    std::vector<Matrix> e(10, Matrix::Zero(2, 2));
    EXPECT_EQ(estimate_sigma(e), Matrix::Zero(4, 4));
    EXPECT_THROW(estimate_sigma(std::vector<Matrix>(4, Matrix::Zero(2, 2))), Error);
}

TEST(Inference, SigmaOfWhiteNoise) {
    Rng rng(3);
    std::vector<Matrix> e;
    for (int t = 0; t < 100000; ++t) e.push_back(random_matrix(3, 2, rng));
    const Matrix s = estimate_sigma(e);
    EXPECT_LT((s - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Inference, WMatrixIsJacobian) {
    Rng rng(12);
    const CoefSet c = random_coefs(3, 2, rng);
    const Matrix x = random_matrix(3, 2, rng);
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j) {
            const Matrix w = w_matrix(c, x, {i, j});
            const Vector beta = flatten_beta(c);
            const double h = 1e-6;
            for (Eigen::Index k = 0; k < beta.size(); ++k) {
                Vector up = beta, dn = beta;
                up(k) += h;
                dn(k) -= h;
                const CoefSet cu = unflatten_beta(up, 3, 2);
                const CoefSet cd = unflatten_beta(dn, 3, 2);
                const Vector fd = (vec(cu.a(i) * x * cu.b(j).transpose()) -
                                   vec(cd.a(i) * x * cd.b(j).transpose())) /
                                  (2 * h);
                EXPECT_LT((w.row(k).transpose() - fd).cwiseAbs().maxCoeff(), 1e-7);
            }
        }
}

TEST(Inference, SandwichIdentityUnderSphericalNoise) {
    const auto s = setting_one(400, 7);
    const FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    const double sigma2 = 1.7;
    const Matrix sig = sigma2 * Matrix::Identity(6, 6);
    const CoefInference inf = asymptotic_cov_beta(s, fit, 0.95, sig);
    Vector gamma = Vector::Zero(inf.h_hat.rows());
    gamma.head(9) = vec(fit.theta_hat.coefs.a1);
    const Matrix h_inv = inf.h_hat.inverse();
    const Matrix expected =
        sigma2 * h_inv * (inf.h_hat - gamma * gamma.transpose()) * h_inv;
    EXPECT_LT((inf.xi_hat - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Inference, CoefIntervalsAreNestedAndSymmetric) {
    const auto s = setting_one(500, 9);
    const FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    const CoefInference inf = asymptotic_cov_beta(s, fit);
    EXPECT_LT((inf.xi_hat - inf.xi_hat.transpose()).norm(), 1e-8);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(inf.xi_hat).eigenvalues().minCoeff(), -1e-8);
    const auto i90 = coef_intervals(inf, 0.90);
    const auto i99 = coef_intervals(inf, 0.99);
    ASSERT_EQ(inf.intervals.size(), 26u);
    for (std::size_t k = 0; k < 26; ++k) {
        EXPECT_LE(inf.intervals[k].lower, inf.beta_hat(k));
        EXPECT_GE(inf.intervals[k].upper, inf.beta_hat(k));
        EXPECT_LE(i99[k].lower, inf.intervals[k].lower);
        EXPECT_LE(inf.intervals[k].lower, i90[k].lower);
        EXPECT_GE(i99[k].upper, inf.intervals[k].upper);
    }
}

TEST(Inference, NormalQuantile) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
}

TEST(Inference, XiScalarExpansion) {
    Matrix phi(1, 1);
    phi << 0.7;
    Vector x(1), e(1);
    x << -2.0;
    e << 0.3;
    EXPECT_NEAR(xi_value(phi, x, e), 0.49 * 4.0 + 2.0 * 0.3 * 0.7 * -2.0, 1e-15);
}

TEST(Inference, EqualCoefficientsGiveZeroJumps) {
    const auto s = setting_one(300, 4);
    FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    fit.theta_hat.coefs.a2 = fit.theta_hat.coefs.a1;
    for (int which : {1, 2}) {
        const auto g = gamma_jump_samples(s, fit, which, 0.5);
        for (double v : g.values) EXPECT_EQ(v, 0.0);
    }
    const auto g3 = gamma_jump_samples(s, fit, 3, 0.5);
    EXPECT_GT(std::abs(g3.values[5]), 0.0);
    fit.theta_hat.coefs.b2 = fit.theta_hat.coefs.b1;
    for (int which : {3, 4}) {
        const auto g = gamma_jump_samples(s, fit, which, 0.5);
        for (double v : g.values) EXPECT_EQ(v, 0.0);
    }
}

TEST(Inference, JumpSampleUsesTrueRowRegime) {
    const auto s = setting_one(200, 2);
    const FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    const auto g = gamma_jump_samples(s, fit, 3, 1.0);
    const auto& c = fit.theta_hat.coefs;
    for (std::size_t t = 1; t < 20; ++t) {
        const Matrix& a = s.z[t - 1] <= fit.theta_hat.tau.r ? c.a1 : c.a2;
        const Matrix phi = kron(c.b2 - c.b1, a);
        EXPECT_NEAR(g.values[t - 1], xi_value(phi, vec(s.x[t - 1]), vec(fit.residuals[t - 1])),
                    1e-12);
    }
}

TEST(Inference, JumpMeansPositiveOnDesign) {
    const auto s = setting_one(1000, 1);
    const FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    for (int which = 1; which <= 4; ++which) {
        const auto g = gamma_jump_samples(s, fit, which, 0.1);
        EXPECT_GT(g.weighted_mean(), 0.0) << which;
    }
}

TEST(Inference, TinyBandwidthIsRejected) {
    const auto s = setting_one(200, 2);
    FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    fit.theta_hat.tau.r = 1e6;
    try {
        gamma_jump_samples(s, fit, 1, 1e-3);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BandwidthTooSmall);
    }
}

TEST(Inference, ArgminWithPositiveJumpsSitsAtFirstLeftJump) {
    // All jumps positive: the minimum is level 0 on [-a'_1, a_1), so M- = -Exp(rate).
    const auto up = unweighted({1.0, 2.0});
    Rng rng(5);
    std::vector<double> draws;
    for (int k = 0; k < 20000; ++k) draws.push_back(simulate_argmin(up, up, 2.5, rng));
    for (double d : draws) EXPECT_LT(d, 0.0);
    EXPECT_NEAR(mean(draws), -1.0 / 2.5, 0.01);
}

TEST(Inference, ArgminMatchesBruteForceOracle) {
    const std::vector<double> right{-1.0, 0.5, 2.0, 3.0};
    const std::vector<double> left{-0.5, 1.0, 1.5};
    Rng rng_fast(1), rng_brute(2);
    std::vector<double> fast, brute;
    for (int k = 0; k < 20000; ++k) {
        fast.push_back(simulate_argmin(unweighted(right), unweighted(left), 1.3, rng_fast));
        brute.push_back(brute_argmin(right, left, 1.3, rng_brute, 400));
    }
    for (double p : {0.05, 0.25, 0.5, 0.75, 0.95})
        EXPECT_NEAR(quantile(fast, p), quantile(brute, p), 0.1 + 0.05 * std::abs(quantile(brute, p)))
            << p;
}

TEST(Inference, ThresholdIntervalsNestedAndContainEstimate) {
    const auto s = setting_one(1000, 3);
    GridSpec grid;
    grid.max_candidates_per_axis = 30;
    const FitResult fit = grid_search_fit(s, grid, AlsOptions{});
    const auto inf = threshold_ci(s, fit, 0.90, 500, std::nullopt, 11);
    EXPECT_TRUE(inf.r_interval.contains(fit.theta_hat.tau.r));
    EXPECT_TRUE(inf.s_interval.contains(fit.theta_hat.tau.s));
    EXPECT_GT(inf.jump_rate_r, 0.0);
    EXPECT_GT(inf.jump_rate_s, 0.0);
    const auto r95 = threshold_interval(inf.m_minus_r, fit.theta_hat.tau.r, s.length(), 0.95);
    const auto r99 = threshold_interval(inf.m_minus_r, fit.theta_hat.tau.r, s.length(), 0.99);
    EXPECT_LE(r99.lower, r95.lower);
    EXPECT_LE(r95.lower, inf.r_interval.lower);
    EXPECT_GE(r99.upper, r95.upper);
    EXPECT_GE(r95.upper, inf.r_interval.upper);

    // The two simulated coordinates are independent by construction.
    double mr = mean(inf.m_minus_r), ms = mean(inf.m_minus_s), sxy = 0, sxx = 0, syy = 0;
    for (int k = 0; k < 500; ++k) {
        sxy += (inf.m_minus_r[k] - mr) * (inf.m_minus_s[k] - ms);
        sxx += (inf.m_minus_r[k] - mr) * (inf.m_minus_r[k] - mr);
        syy += (inf.m_minus_s[k] - ms) * (inf.m_minus_s[k] - ms);
    }
    EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 3.0 / std::sqrt(500.0));
}

TEST(Inference, ThresholdCiIsSeededAndThreadInvariant) {
    const auto s = setting_one(400, 8);
    const FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    const auto a = threshold_ci(s, fit, 0.9, 200, Bandwidths{0.2, 0.2}, 4, 1);
    const auto b = threshold_ci(s, fit, 0.9, 200, Bandwidths{0.2, 0.2}, 4, 3);
    EXPECT_EQ(a.m_minus_r, b.m_minus_r);
    EXPECT_EQ(a.m_minus_s, b.m_minus_s);
    EXPECT_EQ(a.bandwidth_z, 0.2);
}

TEST(Inference, IndependenceDiagnostic) {
    Rng rng(1);
    std::normal_distribution<double> normal;
    std::vector<std::pair<double, double>> same, indep;
    for (int k = 0; k < 500; ++k) {
        const double u = normal(rng);
        same.emplace_back(u, u);
        indep.emplace_back(normal(rng), normal(rng));
    }
    const auto dep = independence_diagnostic(same, 500, 3);
    EXPECT_LT(dep.p_value, 0.01);
    EXPECT_NEAR(dep.statistic, 1.0, 1e-12);
    const auto ind = independence_diagnostic(indep, 500, 3);
    EXPECT_GT(ind.p_value, 0.05);
    EXPECT_THROW(independence_diagnostic(std::vector<std::pair<double, double>>(10), 100, 1),
                 Error);
}

TEST(Inference, IndependenceDiagnosticCalibration) {
    // Under independence the p-value is roughly uniform: about 5% fall below 0.05.
    int rejections = 0;
    const int runs = 100;
    for (int run = 0; run < runs; ++run) {
        Rng rng(1000 + run);
        std::normal_distribution<double> normal;
        std::vector<std::pair<double, double>> pairs;
        for (int k = 0; k < 60; ++k) pairs.emplace_back(normal(rng), normal(rng));
        if (independence_diagnostic(pairs, 199, run).p_value <= 0.05) ++rejections;
    }
    EXPECT_LE(rejections, 13);
}
