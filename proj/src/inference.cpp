#include "martkit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <spdlog/spdlog.h>

#include "martkit/parallel.hpp"
#include "martkit/rng.hpp"
#include "martkit/stats.hpp"

namespace martkit {

namespace {

constexpr int kStallJumps = 20;
constexpr int kMaxJumps = 1'000'000;
constexpr double kMaxCondition = 1e12;

double gaussian_kernel(double u) { return std::exp(-0.5 * u * u); }

void check_level(double level) {
    require(level > 0.0 && level < 1.0, ErrorKind::InvalidArgument,
            "confidence level must lie in (0, 1)");
}

// Inverse-CDF sampler over a weighted sample.
class WeightedSampler {
public:
    explicit WeightedSampler(const WeightedSample& s) : values_(s.values) {
        cumulative_.resize(s.weights.size());
        std::partial_sum(s.weights.begin(), s.weights.end(), cumulative_.begin());
        total_ = cumulative_.empty() ? 0.0 : cumulative_.back();
        require(s.values.size() == s.weights.size() && total_ > 0.0 && std::isfinite(total_),
                ErrorKind::InvalidArgument, "jump sample needs positive finite total weight");
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            m1 += s.weights[k] * values_[k];
            m2 += s.weights[k] * values_[k] * values_[k];
        }
        mean_ = m1 / total_;
        second_moment_ = m2 / total_;
    }

    double draw(Rng& rng) const {
        const double u = std::uniform_real_distribution<double>(0.0, total_)(rng);
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) --it;
        return values_[static_cast<std::size_t>(it - cumulative_.begin())];
    }

    // Drop from the running minimum that a walk with these increments is
    // very unlikely (about e^-14 in the diffusion approximation) to undo.
    double safe_gap() const {
        return mean_ > 0.0 ? 7.0 * second_moment_ / mean_ : std::numeric_limits<double>::infinity();
    }

private:
    std::vector<double> values_;
    std::vector<double> cumulative_;
    double total_ = 0.0;
    double mean_ = 0.0;
    double second_moment_ = 0.0;
};

double argmin_left_endpoint(const WeightedSampler& right, const WeightedSampler& left, double rate,
                            Rng& rng) {
    std::exponential_distribution<double> gap(rate);

    // Left side, walking outwards from 0. The level held before the k-th
    // left jump (at -a_k) covers [-a_k, -a_{k-1}); level 0 covers [-a_1, a_1)
    // and is handled here. Ties prefer the farther-left interval.
    double level = 0.0;
    double time = 0.0;
    double left_min = std::numeric_limits<double>::infinity();
    double left_end = 0.0;
    int stall = 0;
    const double left_gap = left.safe_gap();
    for (int k = 0; k < kMaxJumps; ++k) {
        time += gap(rng);
        if (level <= left_min) {
            left_min = level;
            left_end = -time;
            stall = 0;
        } else {
            ++stall;
        }
        if (stall >= kStallJumps && level - left_min >= left_gap) break;
        level += left.draw(rng);
    }

    // Right side: level after the k-th jump covers [a_k, a_{k+1}); ties
    // prefer the earlier interval, and everything here lies right of level 0.
    level = 0.0;
    time = 0.0;
    double right_min = std::numeric_limits<double>::infinity();
    double right_end = 0.0;
    stall = 0;
    const double right_gap = right.safe_gap();
    for (int k = 0; k < kMaxJumps; ++k) {
        time += gap(rng);
        level += right.draw(rng);
        if (level < right_min) {
            right_min = level;
            right_end = time;
            stall = 0;
        } else {
            ++stall;
        }
        if (stall >= kStallJumps && level - std::min(right_min, 0.0) >= right_gap) break;
    }
    return left_min <= right_min ? left_end : right_end;
}

}  // namespace

double normal_quantile(double p) {
    require(p > 0.0 && p < 1.0, ErrorKind::InvalidArgument, "normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Matrix estimate_sigma(const std::vector<Matrix>& residuals) {
    require(!residuals.empty(), ErrorKind::InsufficientData, "no residuals");
    const auto mn = residuals.front().size();
    require(static_cast<Eigen::Index>(residuals.size()) >= mn + 1, ErrorKind::InsufficientData,
            "estimating the error covariance needs at least mn + 1 residuals");
    Vector mu = Vector::Zero(mn);
    for (const auto& e : residuals) mu += vec(e);
    mu /= static_cast<double>(residuals.size());
    Matrix s = Matrix::Zero(mn, mn);
    for (const auto& e : residuals) {
        const Vector d = vec(e) - mu;
        s.noalias() += d * d.transpose();
    }
    s /= static_cast<double>(residuals.size() - 1);
    return 0.5 * (s + s.transpose());
}

Matrix w_matrix(const CoefSet& coefs, const Matrix& x_prev, RegimeLabel label) {
    const auto m = coefs.rows();
    const auto n = coefs.cols();
    Matrix w = Matrix::Zero(beta_length(m, n), m * n);
    const Matrix& a = coefs.a(label.i);
    const Matrix& b = coefs.b(label.j);
    const Eigen::Index off_a = (label.i - 1) * m * m;
    const Eigen::Index off_b = 2 * m * m + (label.j - 1) * n * n;

    // d vec(A X B') / d A(p,q): entry (p, c) gets (X B')(q, c).
    const Matrix xb = x_prev * b.transpose();
    for (Eigen::Index q = 0; q < m; ++q)
        for (Eigen::Index p = 0; p < m; ++p)
            for (Eigen::Index c = 0; c < n; ++c) w(off_a + p + m * q, p + m * c) = xb(q, c);
    // d vec(A X B') / d B(k,l): entry (r, k) gets (A X)(r, l).
    const Matrix ax = a * x_prev;
    for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index r = 0; r < m; ++r) w(off_b + k + n * l, r + m * k) = ax(r, l);
    return w;
}

CoefInference asymptotic_cov_beta(const MatrixSeries& series, const FitResult& fit, double level,
                                  const std::optional<Matrix>& sigma) {
    series.validate();
    check_level(level);
    const auto& coefs = fit.theta_hat.coefs;
    coefs.validate();
    const auto m = series.rows();
    const auto n = series.cols();
    require(coefs.rows() == m && coefs.cols() == n, ErrorKind::InvalidArgument,
            "fit and series dimensions differ");
    require(fit.residuals.size() + 1 == series.length(), ErrorKind::InvalidArgument,
            "fit residuals do not match the series");
    if (!fit.converged) spdlog::warn("coefficient inference on a fit that did not converge");

    CoefInference out;
    out.length = series.length();
    out.sigma_hat = sigma ? *sigma : estimate_sigma(fit.residuals);
    require(out.sigma_hat.rows() == m * n && out.sigma_hat.cols() == m * n,
            ErrorKind::InvalidArgument, "error covariance must be mn x mn");

    const auto p = beta_length(m, n);
    Matrix ww = Matrix::Zero(p, p);
    Matrix wsw = Matrix::Zero(p, p);
    for (std::size_t t = 1; t < series.length(); ++t) {
        const auto label = classify_regime(series.z[t - 1], series.w[t - 1], fit.theta_hat.tau);
        const Matrix w = w_matrix(coefs, series.x[t - 1], label);
        ww.noalias() += w * w.transpose();
        wsw.noalias() += w * out.sigma_hat * w.transpose();
    }
    const double count = static_cast<double>(series.length() - 1);
    ww /= count;
    wsw /= count;

    Vector gamma = Vector::Zero(p);
    gamma.head(m * m) = vec(coefs.a1);
    out.h_hat = ww + gamma * gamma.transpose();
    out.h_hat = 0.5 * (out.h_hat + out.h_hat.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(out.h_hat);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    out.h_condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    require(out.h_condition <= kMaxCondition, ErrorKind::InferenceFailed,
            "H is numerically singular (condition number " + std::to_string(out.h_condition) +
                "); some regime may be too sparse");

    const Matrix h_inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                         eig.eigenvectors().transpose();
    out.xi_hat = h_inv * wsw * h_inv;
    out.xi_hat = 0.5 * (out.xi_hat + out.xi_hat.transpose());
    out.beta_hat = flatten_beta(coefs);
    out.intervals = coef_intervals(out, level);
    return out;
}

std::vector<Interval> coef_intervals(const CoefInference& inf, double level) {
    check_level(level);
    const double zq = normal_quantile(0.5 + 0.5 * level);
    const double t = static_cast<double>(inf.length);
    std::vector<Interval> out;
    out.reserve(static_cast<std::size_t>(inf.beta_hat.size()));
    for (Eigen::Index k = 0; k < inf.beta_hat.size(); ++k) {
        const double half = zq * std::sqrt(std::max(inf.xi_hat(k, k), 0.0) / t);
        out.push_back({inf.beta_hat(k) - half, inf.beta_hat(k) + half, level});
    }
    return out;
}

double xi_value(const Matrix& phi, const Vector& x_prev, const Vector& resid) {
    const Vector px = phi * x_prev;
    return px.squaredNorm() + 2.0 * resid.dot(px);
}

double WeightedSample::weighted_mean() const {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        num += weights[k] * values[k];
        den += weights[k];
    }
    require(den > 0.0, ErrorKind::BandwidthTooSmall, "all kernel weights are zero");
    return num / den;
}

double default_bandwidth(const std::vector<double>& values) {
    return 1.06 * sample_sd(values) * std::pow(static_cast<double>(values.size()), -0.2);
}

WeightedSample gamma_jump_samples(const MatrixSeries& series, const FitResult& fit, int which,
                                  double bandwidth) {
    require(which >= 1 && which <= 4, ErrorKind::InvalidArgument,
            "jump sample index must be 1, 2, 3 or 4");
    require(bandwidth > 0.0 && std::isfinite(bandwidth), ErrorKind::InvalidArgument,
            "bandwidth must be positive");
    require(fit.residuals.size() + 1 == series.length(), ErrorKind::InvalidArgument,
            "fit residuals do not match the series");
    const auto& c = fit.theta_hat.coefs;
    const auto& tau = fit.theta_hat.tau;

    // phi[k] is used for observations whose other-axis regime is k + 1.
    std::array<Matrix, 2> phi;
    const bool row_jump = which <= 2;
    const double sign = (which == 1 || which == 3) ? 1.0 : -1.0;
    for (int k = 0; k < 2; ++k)
        phi[k] = row_jump ? kron(c.b(k + 1), sign * (c.a2 - c.a1))
                          : kron(sign * (c.b2 - c.b1), c.a(k + 1));

    WeightedSample out;
    out.values.reserve(series.length() - 1);
    out.weights.reserve(series.length() - 1);
    double total = 0.0;
    for (std::size_t t = 1; t < series.length(); ++t) {
        const double z = series.z[t - 1];
        const double w = series.w[t - 1];
        const int other = row_jump ? (w <= tau.s ? 0 : 1) : (z <= tau.r ? 0 : 1);
        out.values.push_back(xi_value(phi[other], vec(series.x[t - 1]), vec(fit.residuals[t - 1])));
        const double u = row_jump ? (z - tau.r) / bandwidth : (w - tau.s) / bandwidth;
        out.weights.push_back(gaussian_kernel(u));
        total += out.weights.back();
    }
    require(total > 1e-10, ErrorKind::BandwidthTooSmall,
            "kernel weights vanish: bandwidth " + std::to_string(bandwidth) +
                " is too small for the threshold variable near its estimate");
    return out;
}

double simulate_argmin(const WeightedSample& right, const WeightedSample& left, double rate,
                       Rng& rng) {
    require(rate > 0.0 && std::isfinite(rate), ErrorKind::InvalidArgument,
            "jump rate must be positive");
    return argmin_left_endpoint(WeightedSampler(right), WeightedSampler(left), rate, rng);
}

Interval threshold_interval(const std::vector<double>& m_minus, double estimate,
                            std::size_t length, double level) {
    check_level(level);
    std::vector<double> sorted = m_minus;
    std::sort(sorted.begin(), sorted.end());
    const double q_lo = quantile_sorted(sorted, 0.5 - 0.5 * level);
    const double q_hi = quantile_sorted(sorted, 0.5 + 0.5 * level);
    const double t = static_cast<double>(length);
    return {estimate - q_hi / t, estimate - q_lo / t, level};
}

ThresholdInference threshold_ci(const MatrixSeries& series, const FitResult& fit, double level,
                                int n_sims, const std::optional<Bandwidths>& bandwidths,
                                std::uint64_t seed, int threads) {
    series.validate();
    check_level(level);
    require(n_sims >= 2, ErrorKind::InvalidArgument, "n_sims must be at least 2");
    std::vector<double> z(series.z.begin(), series.z.end() - 1);
    std::vector<double> w(series.w.begin(), series.w.end() - 1);

    ThresholdInference out;
    out.n_sims = n_sims;
    out.bandwidth_z = bandwidths ? bandwidths->z : default_bandwidth(z);
    out.bandwidth_w = bandwidths ? bandwidths->w : default_bandwidth(w);
    require(out.bandwidth_z > 0.0 && out.bandwidth_w > 0.0, ErrorKind::BandwidthTooSmall,
            "threshold variable has no spread; bandwidth would be zero");

    std::array<WeightedSample, 4> jumps;
    for (int k = 0; k < 4; ++k)
        jumps[k] = gamma_jump_samples(series, fit, k + 1, k < 2 ? out.bandwidth_z : out.bandwidth_w);
    for (int k = 0; k < 4; ++k) {
        out.jump_means[k] = jumps[k].weighted_mean();
        if (!(out.jump_means[k] > 0.0))
            spdlog::warn("jump distribution {} has non-positive mean {}; the threshold effect may "
                         "be vanishing",
                         k + 1, out.jump_means[k]);
    }

    const auto density = [](const std::vector<double>& v, double at, double h) {
        double s = 0.0;
        for (double x : v) s += gaussian_kernel((x - at) / h);
        return s / (static_cast<double>(v.size()) * h * std::sqrt(2.0 * M_PI));
    };
    out.jump_rate_r = density(z, fit.theta_hat.tau.r, out.bandwidth_z);
    out.jump_rate_s = density(w, fit.theta_hat.tau.s, out.bandwidth_w);
    require(out.jump_rate_r > 0.0 && out.jump_rate_s > 0.0, ErrorKind::BandwidthTooSmall,
            "estimated jump rate is zero");

    const WeightedSampler s1(jumps[0]), s2(jumps[1]), s3(jumps[2]), s4(jumps[3]);
    out.m_minus_r.assign(static_cast<std::size_t>(n_sims), 0.0);
    out.m_minus_s.assign(static_cast<std::size_t>(n_sims), 0.0);
    const std::uint64_t base = stream_seed(seed, static_cast<std::uint64_t>(Stream::ThresholdSimulation));
    parallel_for(static_cast<std::size_t>(n_sims), threads, [&](std::size_t i) {
        Rng rng(stream_seed(base, i));
        out.m_minus_r[i] = argmin_left_endpoint(s1, s2, out.jump_rate_r, rng);
        out.m_minus_s[i] = argmin_left_endpoint(s3, s4, out.jump_rate_s, rng);
    });
    out.r_interval = threshold_interval(out.m_minus_r, fit.theta_hat.tau.r, series.length(), level);
    out.s_interval = threshold_interval(out.m_minus_s, fit.theta_hat.tau.s, series.length(), level);
    return out;
}

IndependenceResult independence_diagnostic(const std::vector<std::pair<double, double>>& pairs,
                                           int n_permutations, std::uint64_t seed) {
    require(pairs.size() >= 50, ErrorKind::InsufficientData,
            "the independence diagnostic needs at least 50 pairs");
    require(n_permutations >= 1, ErrorKind::InvalidArgument, "n_permutations must be positive");
    const auto n = static_cast<Eigen::Index>(pairs.size());

    // Double-centred distance matrices.
    auto centred = [&](auto pick) {
        Matrix d(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                d(i, j) = std::abs(pick(pairs[static_cast<std::size_t>(i)]) -
                                   pick(pairs[static_cast<std::size_t>(j)]));
        const Vector row = d.rowwise().mean();
        const double all = d.mean();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) d(i, j) += all - row(i) - row(j);
        return d;
    };
    const Matrix a = centred([](const auto& p) { return p.first; });
    const Matrix b = centred([](const auto& p) { return p.second; });
    const double var_a = a.cwiseProduct(a).mean();
    const double var_b = b.cwiseProduct(b).mean();

    IndependenceResult out;
    out.n_permutations = n_permutations;
    if (!(var_a > 0.0) || !(var_b > 0.0)) {
        out.statistic = 0.0;
        out.p_value = 1.0;
        return out;
    }
    const double scale = std::sqrt(var_a * var_b);
    const double observed = a.cwiseProduct(b).mean();
    out.statistic = std::sqrt(std::max(observed, 0.0) / scale);

    Rng rng = make_rng(seed, Stream::Permutations);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    int exceed = 0;
    for (int k = 0; k < n_permutations; ++k) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
            for (Eigen::Index i = 0; i < n; ++i) acc += a(i, j) * b(perm[static_cast<std::size_t>(i)], pj);
        }
        if (acc / static_cast<double>(n * n) >= observed) ++exceed;
    }
    out.p_value = (1.0 + exceed) / (1.0 + n_permutations);
    return out;
}

}  // namespace martkit
