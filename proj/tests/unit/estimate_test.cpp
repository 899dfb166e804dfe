#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "martkit/estimate.hpp"
#include "martkit/simulate.hpp"
#include "test_support.hpp"

using namespace martkit;

namespace {

MatrixSeries setting_one(std::size_t length, std::uint64_t seed) {
    DgpSpec spec;
    spec.theta = design_dgp(3, 2);
    spec.noise = setting_noise(Setting::I, 3, 2, seed);
    spec.length = length;
    return simulate_2mart(spec);
}

std::vector<double> iota_values(int count) {
    std::vector<double> v(static_cast<std::size_t>(count));
    std::iota(v.begin(), v.end(), 1.0);
    return v;
}

}  // namespace

TEST(Estimate, LossIsScaledDirectSum) {
    const auto s = setting_one(120, 3);
    const ThetaParams truth = design_dgp(3, 2);
    EXPECT_NEAR(loss(s, truth), martkit::testing::direct_sse(s, truth) / 120.0, 1e-13);
    const auto res = residuals(s, truth);
    ASSERT_EQ(res.size(), 119u);
    double ss = 0.0;
    for (const auto& e : res) ss += e.squaredNorm();
    EXPECT_NEAR(ss / 120.0, loss(s, truth), 1e-13);
}

TEST(Estimate, AlsFitSolvesNormalEquations) {
    const auto s = setting_one(400, 11);
    const ThetaParams truth = design_dgp(3, 2);
    const FitResult fit = als_fit(s, truth.tau, AlsOptions{});
    EXPECT_TRUE(fit.converged);
    EXPECT_LE(fit.loss, loss(s, truth));
    EXPECT_NEAR(fit.theta_hat.coefs.a1.norm(), 1.0, 1e-12);
    EXPECT_GE(fit.theta_hat.coefs.b1(0, 0), 0.0);
    for (const auto& g : gradient_conditions(s, fit.theta_hat))
        EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_NEAR(fit.loss, fit.loss_trace.back(), 1e-9);
    const auto counts = regime_counts(s, truth.tau);
    EXPECT_EQ(fit.regime_counts, counts);
}

TEST(Estimate, AlsFitIsLocalMinimum) {
    const auto s = setting_one(300, 5);
    const FitResult fit = als_fit(s, design_dgp(3, 2).tau, AlsOptions{});
    Rng rng(1);
    for (int k = 0; k < 10; ++k) {
        ThetaParams moved = fit.theta_hat;
        moved.coefs.a2 += martkit::testing::random_matrix(3, 3, rng, 1e-3);
        moved.coefs.b1 += martkit::testing::random_matrix(2, 2, rng, 1e-3);
        EXPECT_GE(loss(s, moved), fit.loss - 1e-12);
    }
}

TEST(Estimate, InitializationsAgree) {
    const auto s = setting_one(400, 2);
    const Thresholds tau = design_dgp(3, 2).tau;
    AlsOptions opts;
    const FitResult a = als_fit(s, tau, opts);
    opts.init = InitKind::Identity;
    const FitResult b = als_fit(s, tau, opts);
    EXPECT_LT(kronecker_error(a.theta_hat.coefs, b.theta_hat.coefs), 1e-8);
    opts.init = InitKind::Provided;
    EXPECT_THROW(als_fit(s, tau, opts), Error);
}

TEST(Estimate, MarInitRecoversSingleRegimeModel) {
    DgpSpec spec;
    spec.theta = design_dgp(3, 2);
    spec.theta.coefs.a2 = spec.theta.coefs.a1;
    spec.theta.coefs.b2 = spec.theta.coefs.b1;
    spec.length = 4000;
    spec.noise.seed = 8;
    const auto s = simulate_2mart(spec);
    const CoefSet mar = mar_init(s, AlsOptions{});
    EXPECT_EQ(mar.a1, mar.a2);
    EXPECT_LT((kron(mar.b1, mar.a1) - kron(spec.theta.coefs.b1, spec.theta.coefs.a1)).norm(), 0.1);
}

TEST(Estimate, AxisCandidatesTrimAndOccupancy) {
    const auto values = iota_values(100);
    GridSpec grid;
    auto c = build_axis_candidates(values, grid, {}, 5);
    ASSERT_EQ(c.full.size(), 80u);
    EXPECT_EQ(c.full.front(), 11.0);
    EXPECT_EQ(c.full.back(), 90.0);
    EXPECT_EQ(c.coarse, c.full);

    // r = v leaves v observations below and 100 - v above.
    c = build_axis_candidates(values, grid, {}, 20);
    EXPECT_EQ(c.full.front(), 20.0);
    EXPECT_EQ(c.full.back(), 80.0);

    grid.max_candidates_per_axis = 10;
    c = build_axis_candidates(values, grid, {55.5}, 5);
    EXPECT_EQ(c.coarse.size(), 11u);
    EXPECT_EQ(c.coarse.front(), 11.0);
    EXPECT_EQ(c.coarse.back(), 90.0);
    EXPECT_TRUE(std::find(c.coarse.begin(), c.coarse.end(), 55.5) != c.coarse.end());
    EXPECT_TRUE(std::find(c.full.begin(), c.full.end(), 55.5) != c.full.end());

    grid.source = CandidateSource::UniformQuantiles;
    c = build_axis_candidates(values, grid, {}, 5);
    EXPECT_EQ(c.coarse.size(), 10u);
    EXPECT_NEAR(c.coarse.front(), 1.0 + 0.1 * 99, 1e-12);
    EXPECT_NEAR(c.coarse.back(), 1.0 + 0.9 * 99, 1e-12);
}

TEST(Estimate, GridSpecValidation) {
    GridSpec grid;
    grid.trim_fraction = 0.5;
    EXPECT_THROW(grid.validate(), Error);
    grid.trim_fraction = 0.1;
    grid.max_candidates_per_axis = 0;
    EXPECT_THROW(grid.validate(), Error);
}

TEST(Estimate, GridSearchPicksProfileMinimum) {
    const auto s = setting_one(300, 21);
    GridSpec grid;
    grid.max_candidates_per_axis = 12;
    const FitResult fit = grid_search_fit(s, grid, AlsOptions{});
    ASSERT_TRUE(fit.grid.has_value());
    const auto& d = *fit.grid;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < d.profile_loss.rows(); ++a)
        for (Eigen::Index b = 0; b < d.profile_loss.cols(); ++b)
            if (std::isfinite(d.profile_loss(a, b))) best = std::min(best, d.profile_loss(a, b));
    for (const auto& p : d.refined) best = std::min(best, p.loss);
    // The chosen pair attains the grid minimum; the refit can only improve it.
    EXPECT_LE(fit.loss, best + 1e-9);
    const FitResult at = als_fit(s, fit.theta_hat.tau, AlsOptions{});
    EXPECT_NEAR(at.loss, fit.loss, 1e-9);
    EXPECT_FALSE(d.refined.empty());
}

TEST(Estimate, GridSearchIsThreadInvariant) {
    const auto s = setting_one(250, 4);
    GridSpec grid;
    grid.max_candidates_per_axis = 15;
    const FitResult one = grid_search_fit(s, grid, AlsOptions{}, 1);
    const FitResult three = grid_search_fit(s, grid, AlsOptions{}, 3);
    EXPECT_EQ(one.theta_hat.tau.r, three.theta_hat.tau.r);
    EXPECT_EQ(one.theta_hat.tau.s, three.theta_hat.tau.s);
    EXPECT_EQ(flatten_beta(one.theta_hat.coefs), flatten_beta(three.theta_hat.coefs));
    EXPECT_TRUE(one.grid->profile_loss.cwiseEqual(three.grid->profile_loss).count() +
                    one.grid->profile_loss.array().isNaN().count() ==
                one.grid->profile_loss.size());
}

TEST(Estimate, NoiseFreeRecovery) {
    const auto c = martkit::testing::noise_free_case(3, 2, 500, 1);
    GridSpec grid;
    grid.extra_r = {c.truth.tau.r};
    grid.extra_s = {c.truth.tau.s};
    const FitResult fit = grid_search_fit(c.series, grid, AlsOptions{});
    EXPECT_EQ(fit.theta_hat.tau.r, c.truth.tau.r);
    EXPECT_EQ(fit.theta_hat.tau.s, c.truth.tau.s);
    EXPECT_LT(kronecker_error(fit.theta_hat.coefs, c.truth.coefs), 1e-10);
}

TEST(Estimate, RejectsShortSeries) {
    const auto s = setting_one(15, 1);
    try {
        grid_search_fit(s, GridSpec{}, AlsOptions{});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
    }
}
