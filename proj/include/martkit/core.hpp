#pragma once

// Domain types and pure helpers for the two-way threshold matrix
// autoregression
//
//     X_t = A_i X_{t-1} B_j' + E_t,   i = 1 + [z_{t-1} > r],  j = 1 + [w_{t-1} > s].
//
// Matrices are vectorized column-major everywhere, so that
// vec(A X B') = (B kron A) vec(X).

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "martkit/error.hpp"

namespace martkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ThresholdMode {
    /// z_t = mean_j (X_t[m,j] - X_t[1,j]),  w_t = mean_i (X_t[i,n] - X_t[i,1]).
    Endogenous,
    /// z and w are supplied alongside the data.
    Exogenous,
};

/// An observed path X_1..X_T with aligned threshold variables. Index 0 holds
/// the first observation.
struct MatrixSeries {
    std::vector<Matrix> x;
    std::vector<double> z;
    std::vector<double> w;
    ThresholdMode threshold_mode = ThresholdMode::Exogenous;

    std::size_t length() const noexcept { return x.size(); }
    Eigen::Index rows() const noexcept { return x.empty() ? 0 : x.front().rows(); }
    Eigen::Index cols() const noexcept { return x.empty() ? 0 : x.front().cols(); }

    /// Checks dimensions, lengths and finiteness; throws InvalidArgument.
    void validate() const;

    /// Copy of observations [first, first + count).
    MatrixSeries slice(std::size_t first, std::size_t count) const;
};

/// Row threshold variable computed from one observation.
double endogenous_z(const Matrix& x);
/// Column threshold variable computed from one observation.
double endogenous_w(const Matrix& x);

/// Builds a series whose threshold variables are the endogenous ones.
MatrixSeries make_endogenous_series(std::vector<Matrix> x);

/// Builds a series with user-supplied threshold variables.
MatrixSeries make_exogenous_series(std::vector<Matrix> x, std::vector<double> z,
                                   std::vector<double> w);

struct CoefSet {
    Matrix a1, a2;  // m x m
    Matrix b1, b2;  // n x n
    bool normalized = false;

    Eigen::Index rows() const noexcept { return a1.rows(); }
    Eigen::Index cols() const noexcept { return b1.rows(); }

    const Matrix& a(int i) const { return i == 1 ? a1 : a2; }
    const Matrix& b(int j) const { return j == 1 ? b1 : b2; }

    void validate() const;
};

struct Thresholds {
    double r = 0.0;
    double s = 0.0;
};

struct ThetaParams {
    CoefSet coefs;
    Thresholds tau;
};

struct RegimeLabel {
    int i = 1;  // row regime
    int j = 1;  // column regime

    friend bool operator==(const RegimeLabel&, const RegimeLabel&) = default;
};

using RegimeCounts = std::array<std::array<int, 2>, 2>;

/// Regime (1 claims equality on each axis).
RegimeLabel classify_regime(double z_prev, double w_prev, const Thresholds& tau);

/// counts[i-1][j-1] = #{t in 2..T : regime(z_{t-1}, w_{t-1}) = (i, j)}.
RegimeCounts regime_counts(const MatrixSeries& series, const Thresholds& tau);

Matrix kron(const Matrix& lhs, const Matrix& rhs);

/// Vectorized regime coefficient B_j kron A_i.
Matrix kron_coefficient(const CoefSet& coefs, RegimeLabel label);

Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

/// Rescales so that ||A1||_F = 1 and (B1)(0,0) >= 0, leaving every
/// B_j kron A_i unchanged. Throws DegenerateCoefficient when A1 = 0.
CoefSet normalize(const CoefSet& coefs);

/// One-step conditional mean A_i X_prev B_j'.
Matrix predict_one(const Matrix& x_prev, const ThetaParams& theta, double z_prev,
                   double w_prev);

/// beta = (vec A1', vec A2', vec B1', vec B2')'.
Vector flatten_beta(const CoefSet& coefs);
CoefSet unflatten_beta(const Vector& beta, Eigen::Index m, Eigen::Index n);

/// Length of beta: 2(m^2 + n^2).
Eigen::Index beta_length(Eigen::Index m, Eigen::Index n) noexcept;

/// Sum over the four regimes of ||B^_j kron A^_i - B_j kron A_i||_F^2.
double kronecker_error(const CoefSet& estimate, const CoefSet& truth);

}  // namespace martkit
