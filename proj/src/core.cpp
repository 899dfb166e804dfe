#include "martkit/core.hpp"

#include <cmath>
#include <string>

namespace martkit {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::DegenerateCoefficient: return "degenerate-coefficient";
        case ErrorKind::NonStationary: return "non-stationary";
        case ErrorKind::EstimationFailed: return "estimation-failed";
        case ErrorKind::InferenceFailed: return "inference-failed";
        case ErrorKind::BandwidthTooSmall: return "bandwidth-too-small";
        case ErrorKind::Parse: return "parse-error";
    }
    return "unknown";
}

namespace {

bool all_finite(const Matrix& x) { return x.allFinite(); }

}  // namespace

void MatrixSeries::validate() const {
    require(!x.empty(), ErrorKind::InvalidArgument, "series is empty");
    const auto m = rows();
    const auto n = cols();
    require(m >= 1 && n >= 1, ErrorKind::InvalidArgument, "observations must be non-empty matrices");
    require(z.size() == x.size() && w.size() == x.size(), ErrorKind::InvalidArgument,
            "threshold variables must have the same length as the series");
    for (std::size_t t = 0; t < x.size(); ++t) {
        require(x[t].rows() == m && x[t].cols() == n, ErrorKind::InvalidArgument,
                "observation " + std::to_string(t + 1) + " has inconsistent dimensions");
        require(all_finite(x[t]), ErrorKind::InvalidArgument,
                "observation " + std::to_string(t + 1) + " has non-finite entries");
        require(std::isfinite(z[t]) && std::isfinite(w[t]), ErrorKind::InvalidArgument,
                "threshold variable at t=" + std::to_string(t + 1) + " is not finite");
    }
}

MatrixSeries MatrixSeries::slice(std::size_t first, std::size_t count) const {
    require(first + count <= x.size(), ErrorKind::InvalidArgument, "slice out of range");
    MatrixSeries out;
    out.threshold_mode = threshold_mode;
    out.x.assign(x.begin() + first, x.begin() + first + count);
    out.z.assign(z.begin() + first, z.begin() + first + count);
    out.w.assign(w.begin() + first, w.begin() + first + count);
    return out;
}

double endogenous_z(const Matrix& x) {
    const auto m = x.rows();
    return (x.row(m - 1) - x.row(0)).sum() / static_cast<double>(x.cols());
}

double endogenous_w(const Matrix& x) {
    const auto n = x.cols();
    return (x.col(n - 1) - x.col(0)).sum() / static_cast<double>(x.rows());
}

MatrixSeries make_endogenous_series(std::vector<Matrix> x) {
    MatrixSeries s;
    s.threshold_mode = ThresholdMode::Endogenous;
    s.z.reserve(x.size());
    s.w.reserve(x.size());
    for (const auto& obs : x) {
        s.z.push_back(endogenous_z(obs));
        s.w.push_back(endogenous_w(obs));
    }
    s.x = std::move(x);
    s.validate();
    return s;
}

MatrixSeries make_exogenous_series(std::vector<Matrix> x, std::vector<double> z,
                                   std::vector<double> w) {
    MatrixSeries s;
    s.threshold_mode = ThresholdMode::Exogenous;
    s.x = std::move(x);
    s.z = std::move(z);
    s.w = std::move(w);
    s.validate();
    return s;
}

void CoefSet::validate() const {
    const auto m = a1.rows();
    const auto n = b1.rows();
    require(m >= 1 && n >= 1, ErrorKind::InvalidArgument, "empty coefficient matrices");
    require(a1.cols() == m && a2.rows() == m && a2.cols() == m, ErrorKind::InvalidArgument,
            "A1 and A2 must both be m x m");
    require(b1.cols() == n && b2.rows() == n && b2.cols() == n, ErrorKind::InvalidArgument,
            "B1 and B2 must both be n x n");
    require(a1.allFinite() && a2.allFinite() && b1.allFinite() && b2.allFinite(),
            ErrorKind::InvalidArgument, "coefficients must be finite");
}

RegimeLabel classify_regime(double z_prev, double w_prev, const Thresholds& tau) {
    require(std::isfinite(z_prev) && std::isfinite(w_prev) && std::isfinite(tau.r) &&
                std::isfinite(tau.s),
            ErrorKind::InvalidArgument, "classify_regime: non-finite input");
    return {z_prev <= tau.r ? 1 : 2, w_prev <= tau.s ? 1 : 2};
}

RegimeCounts regime_counts(const MatrixSeries& series, const Thresholds& tau) {
    require(series.length() >= 2, ErrorKind::InsufficientData,
            "regime_counts needs at least two observations");
    RegimeCounts counts{};
    for (std::size_t t = 1; t < series.length(); ++t) {
        const auto label = classify_regime(series.z[t - 1], series.w[t - 1], tau);
        ++counts[label.i - 1][label.j - 1];
    }
    return counts;
}

Matrix kron(const Matrix& lhs, const Matrix& rhs) {
    Matrix out(lhs.rows() * rhs.rows(), lhs.cols() * rhs.cols());
    for (Eigen::Index i = 0; i < lhs.rows(); ++i)
        for (Eigen::Index j = 0; j < lhs.cols(); ++j)
            out.block(i * rhs.rows(), j * rhs.cols(), rhs.rows(), rhs.cols()) = lhs(i, j) * rhs;
    return out;
}

Matrix kron_coefficient(const CoefSet& coefs, RegimeLabel label) {
    require(label.i >= 1 && label.i <= 2 && label.j >= 1 && label.j <= 2,
            ErrorKind::InvalidArgument, "regime label out of range");
    return kron(coefs.b(label.j), coefs.a(label.i));
}

Vector vec(const Matrix& x) { return Eigen::Map<const Vector>(x.data(), x.size()); }

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    require(v.size() == rows * cols, ErrorKind::InvalidArgument, "unvec: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

CoefSet normalize(const CoefSet& coefs) {
    const double c = coefs.a1.norm();
    require(c > 0.0, ErrorKind::DegenerateCoefficient, "normalize: A1 is zero");
    // (B1)(0,0) == 0 keeps the positive sign.
    const double sign = coefs.b1(0, 0) < 0.0 ? -1.0 : 1.0;
    CoefSet out;
    out.a1 = coefs.a1 * (sign / c);
    out.a2 = coefs.a2 * (sign / c);
    out.b1 = coefs.b1 * (sign * c);
    out.b2 = coefs.b2 * (sign * c);
    out.normalized = true;
    return out;
}

Matrix predict_one(const Matrix& x_prev, const ThetaParams& theta, double z_prev,
                   double w_prev) {
    const auto label = classify_regime(z_prev, w_prev, theta.tau);
    const Matrix& a = theta.coefs.a(label.i);
    const Matrix& b = theta.coefs.b(label.j);
    require(a.cols() == x_prev.rows() && b.cols() == x_prev.cols(), ErrorKind::InvalidArgument,
            "predict_one: dimension mismatch");
    return a * x_prev * b.transpose();
}

Eigen::Index beta_length(Eigen::Index m, Eigen::Index n) noexcept { return 2 * (m * m + n * n); }

Vector flatten_beta(const CoefSet& coefs) {
    const auto m = coefs.rows();
    const auto n = coefs.cols();
    Vector beta(beta_length(m, n));
    beta << vec(coefs.a1), vec(coefs.a2), vec(coefs.b1), vec(coefs.b2);
    return beta;
}

CoefSet unflatten_beta(const Vector& beta, Eigen::Index m, Eigen::Index n) {
    require(beta.size() == beta_length(m, n), ErrorKind::InvalidArgument,
            "beta has the wrong length");
    CoefSet c;
    const auto mm = m * m;
    const auto nn = n * n;
    c.a1 = unvec(beta.segment(0, mm), m, m);
    c.a2 = unvec(beta.segment(mm, mm), m, m);
    c.b1 = unvec(beta.segment(2 * mm, nn), n, n);
    c.b2 = unvec(beta.segment(2 * mm + nn, nn), n, n);
    return c;
}

double kronecker_error(const CoefSet& estimate, const CoefSet& truth) {
    double total = 0.0;
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j)
            total += (kron_coefficient(estimate, {i, j}) - kron_coefficient(truth, {i, j}))
                         .squaredNorm();
    return total;
}

}  // namespace martkit
