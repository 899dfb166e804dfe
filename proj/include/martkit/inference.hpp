#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "martkit/core.hpp"
#include "martkit/estimate.hpp"
#include "martkit/rng.hpp"

namespace martkit {

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;

    bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

struct CoefInference {
    Matrix sigma_hat;  // mn x mn
    Matrix h_hat;      // p x p, p = 2(m^2 + n^2)
    Matrix xi_hat;     // asymptotic covariance of sqrt(T)(beta^ - beta)
    Vector beta_hat;
    std::vector<Interval> intervals;  // one per beta entry
    double h_condition = 0.0;
    std::size_t length = 0;  // T used for the interval scaling
};

struct ThresholdInference {
    Interval r_interval;
    Interval s_interval;
    double jump_rate_r = 0.0;  // density of z at r^
    double jump_rate_s = 0.0;  // density of w at s^
    double bandwidth_z = 0.0;
    double bandwidth_w = 0.0;
    int n_sims = 0;
    // Weighted means of the four jump samples; all should be positive.
    std::array<double, 4> jump_means{};
    // Simulated draws of the argmin left endpoints (T(r^ - r0), T(s^ - s0)).
    std::vector<double> m_minus_r;
    std::vector<double> m_minus_s;
};

/// Centred sample covariance of vec(residual_t), divisor count - 1.
Matrix estimate_sigma(const std::vector<Matrix>& residuals);

/// p x mn matrix W_t: column c is the derivative of entry c of
/// vec(A_i X_{t-1} B_j') with respect to beta = (vec A1, vec A2, vec B1, vec B2).
Matrix w_matrix(const CoefSet& coefs, const Matrix& x_prev, RegimeLabel label);

/// Sandwich covariance of the coefficients and normal intervals at `level`.
/// `sigma` replaces the residual covariance estimate when given.
CoefInference asymptotic_cov_beta(const MatrixSeries& series, const FitResult& fit,
                                  double level = 0.95,
                                  const std::optional<Matrix>& sigma = std::nullopt);

/// Intervals beta^_k -/+ z sqrt(xi_kk / T) at another level.
std::vector<Interval> coef_intervals(const CoefInference& inf, double level);

/// xi(Phi) = ||Phi x||^2 + 2 e' Phi x.
double xi_value(const Matrix& phi, const Vector& x_prev, const Vector& resid);

struct WeightedSample {
    std::vector<double> values;
    std::vector<double> weights;

    double weighted_mean() const;
};

/// Rule-of-thumb Gaussian bandwidth 1.06 sd T^(-1/5).
double default_bandwidth(const std::vector<double>& values);

/// Jump values gamma_t^(which) for t = 2..T with Gaussian kernel weights
/// centred at r^ (which = 1, 2) or s^ (which = 3, 4):
///   1: loss change when an observation just above r moves to row regime 1,
///   2: just below r moving to row regime 2, 3 and 4 likewise for s.
WeightedSample gamma_jump_samples(const MatrixSeries& series, const FitResult& fit, int which,
                                  double bandwidth);

/// Draws the left endpoint of the argmin of a two-sided compound Poisson
/// process with rate `rate`, right jumps from `right` and left jumps from
/// `left`.
double simulate_argmin(const WeightedSample& right, const WeightedSample& left, double rate,
                       Rng& rng);

struct Bandwidths {
    double z = 0.0;
    double w = 0.0;
};

/// Level-`level` intervals for (r0, s0) from the simulated argmin law.
/// Without `bandwidths`, the rule of thumb is used on the lagged z and w.
ThresholdInference threshold_ci(const MatrixSeries& series, const FitResult& fit, double level,
                                int n_sims, const std::optional<Bandwidths>& bandwidths,
                                std::uint64_t seed, int threads = 1);

/// Interval for the threshold from simulated argmin draws.
Interval threshold_interval(const std::vector<double>& m_minus, double estimate,
                            std::size_t length, double level);

struct IndependenceResult {
    double statistic = 0.0;  // distance correlation
    double p_value = 1.0;
    int n_permutations = 0;
};

/// Distance-correlation permutation test of independence.
IndependenceResult independence_diagnostic(const std::vector<std::pair<double, double>>& pairs,
                                           int n_permutations, std::uint64_t seed);

/// Standard normal quantile.
double normal_quantile(double p);

}  // namespace martkit
