#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "martkit/core.hpp"
#include "martkit/rng.hpp"

namespace martkit {

enum class NoiseKind {
    Identity,          // Cov(vec E_t) = I_mn
    KroneckerFactors,  // Cov(vec E_t) = sigma_c kron sigma_r
    Zero,              // degenerate, for noise-free experiments
};

enum class NoiseDistribution { Gaussian, StudentT };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Identity;
    Matrix sigma_r;  // m x m, KroneckerFactors only
    Matrix sigma_c;  // n x n, KroneckerFactors only
    std::uint64_t seed = 0;
    NoiseDistribution distribution = NoiseDistribution::Gaussian;
    double student_df = 5.0;  // StudentT only; draws are rescaled to unit variance

    /// Cov(vec E_t) implied by these settings.
    Matrix covariance(Eigen::Index m, Eigen::Index n) const;
    void validate(Eigen::Index m, Eigen::Index n) const;
};

enum class ThresholdDefinition { Endogenous, Exogenous };

struct DgpSpec {
    ThetaParams theta;
    NoiseSpec noise;
    std::size_t length = 0;  // T
    std::size_t burn_in = 200;
    ThresholdDefinition threshold_def = ThresholdDefinition::Endogenous;
    // Exogenous paths cover burn_in + T steps; element k drives the regime of
    // step k + 2 (the pre-sample value for step 1 is 0).
    std::vector<double> exogenous_z;
    std::vector<double> exogenous_w;
    std::optional<Matrix> initial;  // X_0, zero when absent
    bool allow_nonstationary = false;
};

struct StationarityReport {
    bool stationary = false;
    double margin = 0.0;  // 1 - mu
    double mu = 0.0;      // max_{i,j} ||A_i||_2 ||B_j||_2
};

StationarityReport check_stationarity(const CoefSet& coefs);

/// Simulation design coefficients: A1 ∝ ones, A2 ∝ (1 diag, -0.5 off),
/// B1 ∝ ones, B2 ∝ (1 diag, -0.3 off), scaled to Frobenius norms 1, 1, 0.8,
/// 0.8; thresholds (0.02, -0.02).
ThetaParams design_dgp(Eigen::Index m, Eigen::Index n);

/// Random sigma_r = Q L Q' (Haar Q, L = |N(0,1)| i.i.d.) and sigma_c alike.
NoiseSpec make_kronecker_sigma(Eigen::Index m, Eigen::Index n, std::uint64_t seed);

/// Haar-distributed orthonormal matrix (QR of a Gaussian matrix, sign-fixed).
Matrix random_orthonormal(Eigen::Index size, Rng& rng);

enum class Setting { I, II };

/// Noise for the two simulation settings; Setting II draws its factors from `seed`.
NoiseSpec setting_noise(Setting setting, Eigen::Index m, Eigen::Index n, std::uint64_t seed);

MatrixSeries simulate_2mart(const DgpSpec& spec);

}  // namespace martkit
