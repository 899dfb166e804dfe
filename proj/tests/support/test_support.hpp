#pragma once

#include <random>

#include <algorithm>
#include <stdexcept>

#include "martkit/core.hpp"
#include "martkit/rng.hpp"
#include "martkit/simulate.hpp"

namespace martkit::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
    return out;
}

inline CoefSet random_coefs(Eigen::Index m, Eigen::Index n, Rng& rng) {
    CoefSet c;
    c.a1 = random_matrix(m, m, rng);
    c.a2 = random_matrix(m, m, rng);
    c.b1 = random_matrix(n, n, rng);
    c.b2 = random_matrix(n, n, rng);
    return c;
}

// Naive SSE over the sample, used as an independent check of moment code.
inline double direct_sse(const MatrixSeries& s, const ThetaParams& theta) {
    double total = 0.0;
    for (std::size_t t = 1; t < s.length(); ++t) {
        const bool row1 = s.z[t - 1] <= theta.tau.r;
        const bool col1 = s.w[t - 1] <= theta.tau.s;
        const Matrix& a = row1 ? theta.coefs.a1 : theta.coefs.a2;
        const Matrix& b = col1 ? theta.coefs.b1 : theta.coefs.b2;
        total += (s.x[t] - a * s.x[t - 1] * b.transpose()).squaredNorm();
    }
    return total;
}

struct NoiseFreeCase {
    MatrixSeries series;
    ThetaParams truth;
};

// Noise-free 2-MART path with Haar-orthogonal coefficients, so the state
// neither explodes nor decays. The thresholds are moved to the largest
// sample value on their side of zero, which leaves the path unchanged but
// puts the truth on the sample-value grid.
inline NoiseFreeCase noise_free_case(Eigen::Index m, Eigen::Index n, std::size_t length,
                                     std::uint64_t seed) {
    Rng rng(seed);
    DgpSpec spec;
    spec.theta.tau = {0.0, 0.0};
    spec.noise.kind = NoiseKind::Zero;
    spec.length = length;
    spec.burn_in = 0;
    spec.allow_nonstationary = true;
    for (int attempt = 0; attempt < 2000; ++attempt) {
        // some rotations keep z or w on one side; redraw them every 20 starts
        if (attempt % 20 == 0) {
            spec.theta.coefs.a1 = random_orthonormal(m, rng);
            spec.theta.coefs.a2 = random_orthonormal(m, rng);
            spec.theta.coefs.b1 = random_orthonormal(n, rng);
            spec.theta.coefs.b2 = random_orthonormal(n, rng);
        }
        spec.initial = random_matrix(m, n, rng);
        MatrixSeries s = simulate_2mart(spec);
        const auto counts = regime_counts(s, spec.theta.tau);
        const double pairs = static_cast<double>(length - 1);
        const int row1 = counts[0][0] + counts[0][1];
        const int col1 = counts[0][0] + counts[1][0];
        const bool central = row1 > 0.25 * pairs && row1 < 0.75 * pairs && col1 > 0.25 * pairs &&
                             col1 < 0.75 * pairs;
        const int smallest = std::min({counts[0][0], counts[0][1], counts[1][0], counts[1][1]});
        if (!central || smallest < 4 * m * n) continue;
        double r = -1e300, sv = -1e300;
        for (std::size_t t = 0; t + 1 < length; ++t) {
            if (s.z[t] <= 0.0) r = std::max(r, s.z[t]);
            if (s.w[t] <= 0.0) sv = std::max(sv, s.w[t]);
        }
        NoiseFreeCase out{std::move(s), spec.theta};
        out.truth.tau = {r, sv};
        return out;
    }
    throw std::runtime_error("no central noise-free path found");
}

}  // namespace martkit::testing
