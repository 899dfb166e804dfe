#pragma once

// Alternating least squares for bilinear regime models
//
//     vec X_t = (B_{b(k)} kron A_{a(k)}) vec X_{t-1} + e_t   for t in regime k,
//
// driven entirely by per-regime second moments of (vec X_{t-1}, vec X_t), so
// one iteration costs O(K m^2 n^2) regardless of the series length.

#include <functional>
#include <vector>

#include "martkit/core.hpp"

namespace martkit {

/// Second moments of x = vec X_{t-1} and y = vec X_t over one regime.
struct RegimeMoments {
    Matrix sxx;  // sum x x'
    Matrix syx;  // sum y x'
    double syy = 0.0;
    int count = 0;

    RegimeMoments() = default;
    explicit RegimeMoments(Eigen::Index mn)
        : sxx(Matrix::Zero(mn, mn)), syx(Matrix::Zero(mn, mn)) {}

    void add(const Vector& x, const Vector& y);
    RegimeMoments& operator+=(const RegimeMoments& other);
};

/// Regime k is fitted with A[a_index[k]] and B[b_index[k]].
struct RegimeLayout {
    int n_a = 0;
    int n_b = 0;
    std::vector<int> a_index;
    std::vector<int> b_index;

    std::size_t regimes() const noexcept { return a_index.size(); }

    /// Quadrants ordered (1,1), (1,2), (2,1), (2,2) with shared A_i and B_j.
    static RegimeLayout two_way();
    /// Quadrants as in two_way() but with a separate (A, B) pair for each.
    static RegimeLayout per_regime(int regimes);
};

/// Quadrant index of a regime label, matching RegimeLayout::two_way().
inline int quadrant_index(RegimeLabel label) noexcept { return 2 * (label.i - 1) + (label.j - 1); }

struct BilinearCoefs {
    std::vector<Matrix> a;
    std::vector<Matrix> b;
};

struct AlsControl {
    int max_iters = 200;
    double rel_tol = 1e-8;
    double grad_tol = 1e-6;
    bool require_gradient = true;
};

struct AlsOutcome {
    BilinearCoefs coefs;
    double loss = 0.0;  // sse * loss_scale
    std::vector<double> loss_trace;
    int iterations = 0;
    bool converged = false;
    bool ridge_used = false;
    double gradient_norm = 0.0;      // of the scaled loss, w.r.t. all B's
    std::vector<bool> a_held;        // no data for that A: update skipped
    std::vector<bool> b_held;
};

/// Runs ALS from `init`. Losses are reported as sse * loss_scale.
AlsOutcome run_als(const std::vector<RegimeMoments>& moments, const RegimeLayout& layout,
                   BilinearCoefs init, const AlsControl& control, double loss_scale);

/// Scales each connected (A, B) component so its lowest-index A has unit
/// Frobenius norm and its lowest-index B has a non-negative (0,0) entry.
/// Only regimes with data link coefficients.
void normalize_components(BilinearCoefs& coefs, const RegimeLayout& layout,
                          const std::vector<RegimeMoments>& moments);

/// Sum of squared residuals implied by the moments at the given coefficients.
double moment_sse(const std::vector<RegimeMoments>& moments, const RegimeLayout& layout,
                  const BilinearCoefs& coefs);

/// out(k,l) = sum_{p,q} M(p,q) S(p + m k, q + m l): an n x n contraction.
Matrix contract_rows(const Matrix& s, const Matrix& weight, Eigen::Index m, Eigen::Index n);
/// out(p,q) = sum_{k,l} M(k,l) S(p + m k, q + m l): an m x m contraction.
Matrix contract_cols(const Matrix& s, const Matrix& weight, Eigen::Index m, Eigen::Index n);

/// Accumulates moments by regime; `regime_of(t)` returns the regime of the
/// pair (X_{t-1}, X_t) for t = 1..T-1 (0-based), or -1 to drop it.
std::vector<RegimeMoments> accumulate_moments(const MatrixSeries& series, std::size_t regimes,
                                              const std::function<int(std::size_t)>& regime_of);

/// Solves X G = N for symmetric PSD G. Adds a ridge of 1e-8 * trace / size
/// when G is numerically singular and reports it through `ridge_used`.
Matrix solve_gram(const Matrix& numerator, const Matrix& gram, bool& ridge_used);

}  // namespace martkit
