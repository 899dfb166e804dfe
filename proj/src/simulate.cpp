#include "martkit/simulate.hpp"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

namespace martkit {

namespace {

bool is_spd(const Matrix& s) {
    if (s.rows() != s.cols() || !s.allFinite()) return false;
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + s.cwiseAbs().maxCoeff()))
        return false;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    return eig.eigenvalues().minCoeff() > 1e-10;
}

double spectral_norm(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

Matrix ones_off(Eigen::Index size, double off) {
    Matrix out = Matrix::Constant(size, size, off);
    out.diagonal().setOnes();
    return out;
}

}  // namespace

Matrix NoiseSpec::covariance(Eigen::Index m, Eigen::Index n) const {
    switch (kind) {
        case NoiseKind::Identity: return Matrix::Identity(m * n, m * n);
        case NoiseKind::KroneckerFactors: return kron(sigma_c, sigma_r);
        case NoiseKind::Zero: return Matrix::Zero(m * n, m * n);
    }
    return {};
}

void NoiseSpec::validate(Eigen::Index m, Eigen::Index n) const {
    if (kind == NoiseKind::KroneckerFactors) {
        require(sigma_r.rows() == m && sigma_c.rows() == n, ErrorKind::InvalidArgument,
                "noise factors must be m x m and n x n");
        require(is_spd(sigma_r) && is_spd(sigma_c), ErrorKind::InvalidArgument,
                "noise factors must be symmetric positive definite");
    }
    if (distribution == NoiseDistribution::StudentT)
        require(student_df > 2.0, ErrorKind::InvalidArgument,
                "Student-t noise needs more than 2 degrees of freedom");
}

StationarityReport check_stationarity(const CoefSet& coefs) {
    const double a[2] = {spectral_norm(coefs.a1), spectral_norm(coefs.a2)};
    const double b[2] = {spectral_norm(coefs.b1), spectral_norm(coefs.b2)};
    double mu = 0.0;
    for (double ai : a)
        for (double bj : b) mu = std::max(mu, ai * bj);
    return {mu < 1.0, 1.0 - mu, mu};
}

ThetaParams design_dgp(Eigen::Index m, Eigen::Index n) {
    require(m >= 2 && n >= 2, ErrorKind::InvalidArgument, "design_dgp needs m, n >= 2");
    const Matrix a1 = Matrix::Ones(m, m);
    const Matrix a2 = ones_off(m, -0.5);
    const Matrix b1 = Matrix::Ones(n, n);
    const Matrix b2 = ones_off(n, -0.3);
    ThetaParams theta;
    theta.coefs.a1 = a1 / a1.norm();
    theta.coefs.a2 = a2 / a2.norm();
    theta.coefs.b1 = b1 * (0.8 / b1.norm());
    theta.coefs.b2 = b2 * (0.8 / b2.norm());
    theta.coefs.normalized = true;
    theta.tau = {0.02, -0.02};
    return theta;
}

Matrix random_orthonormal(Eigen::Index size, Rng& rng) {
    std::normal_distribution<double> normal;
    Matrix g(size, size);
    for (Eigen::Index j = 0; j < size; ++j)
        for (Eigen::Index i = 0; i < size; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR();
    for (Eigen::Index j = 0; j < size; ++j)
        if (r(j, j) < 0.0) q.col(j) *= -1.0;
    return q;
}

NoiseSpec make_kronecker_sigma(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::NoiseFactors);
    std::normal_distribution<double> normal;
    auto factor = [&](Eigen::Index size) {
        const Matrix q = random_orthonormal(size, rng);
        Vector lambda(size);
        for (Eigen::Index i = 0; i < size; ++i) lambda(i) = std::abs(normal(rng));
        Matrix s = q * lambda.asDiagonal() * q.transpose();
        return Matrix(0.5 * (s + s.transpose()));
    };
    NoiseSpec spec;
    spec.kind = NoiseKind::KroneckerFactors;
    spec.sigma_r = factor(m);
    spec.sigma_c = factor(n);
    spec.seed = seed;
    return spec;
}

NoiseSpec setting_noise(Setting setting, Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
    if (setting == Setting::II) return make_kronecker_sigma(m, n, seed);
    NoiseSpec spec;
    spec.seed = seed;
    return spec;
}

MatrixSeries simulate_2mart(const DgpSpec& spec) {
    const CoefSet& coefs = spec.theta.coefs;
    coefs.validate();
    const auto m = coefs.rows();
    const auto n = coefs.cols();
    require(spec.length >= 2, ErrorKind::InvalidArgument, "simulation length must be >= 2");
    spec.noise.validate(m, n);

    const bool endogenous = spec.threshold_def == ThresholdDefinition::Endogenous;
    const std::size_t steps = spec.burn_in + spec.length;
    if (endogenous) {
        const auto report = check_stationarity(coefs);
        if (!report.stationary) {
            require(spec.allow_nonstationary, ErrorKind::NonStationary,
                    "max ||A_i||_2 ||B_j||_2 = " + std::to_string(report.mu) +
                        " >= 1; refusing endogenous simulation");
            spdlog::warn("simulating with max ||A_i||_2 ||B_j||_2 = {} >= 1", report.mu);
        }
    } else {
        require(spec.exogenous_z.size() == steps && spec.exogenous_w.size() == steps,
                ErrorKind::InvalidArgument,
                "exogenous threshold paths must cover burn_in + T steps");
    }

    Matrix chol_r, chol_c;
    if (spec.noise.kind == NoiseKind::KroneckerFactors) {
        chol_r = spec.noise.sigma_r.llt().matrixL();
        chol_c = spec.noise.sigma_c.llt().matrixL();
    }
    Rng rng = make_rng(spec.noise.seed, Stream::Innovations);
    std::normal_distribution<double> normal;
    std::student_t_distribution<double> student(spec.noise.student_df);
    const double t_scale = spec.noise.distribution == NoiseDistribution::StudentT
                               ? std::sqrt((spec.noise.student_df - 2.0) / spec.noise.student_df)
                               : 1.0;
    auto draw = [&] {
        return spec.noise.distribution == NoiseDistribution::StudentT ? t_scale * student(rng)
                                                                      : normal(rng);
    };

    Matrix x_prev = spec.initial ? *spec.initial : Matrix::Zero(m, n);
    require(x_prev.rows() == m && x_prev.cols() == n, ErrorKind::InvalidArgument,
            "initial state has the wrong dimensions");
    double z_prev = endogenous ? endogenous_z(x_prev) : 0.0;
    double w_prev = endogenous ? endogenous_w(x_prev) : 0.0;

    MatrixSeries out;
    out.threshold_mode = endogenous ? ThresholdMode::Endogenous : ThresholdMode::Exogenous;
    out.x.reserve(spec.length);
    out.z.reserve(spec.length);
    out.w.reserve(spec.length);

    Matrix e(m, n);
    for (std::size_t step = 0; step < steps; ++step) {
        Matrix x = predict_one(x_prev, spec.theta, z_prev, w_prev);
        if (spec.noise.kind != NoiseKind::Zero) {
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < m; ++i) e(i, j) = draw();
            if (spec.noise.kind == NoiseKind::KroneckerFactors)
                x += chol_r * e * chol_c.transpose();
            else
                x += e;
        }
        require(x.allFinite(), ErrorKind::NonStationary,
                "simulated path diverged at step " + std::to_string(step + 1));
        if (endogenous) {
            z_prev = endogenous_z(x);
            w_prev = endogenous_w(x);
        } else {
            z_prev = spec.exogenous_z[step];
            w_prev = spec.exogenous_w[step];
        }
        if (step >= spec.burn_in) {
            out.x.push_back(x);
            out.z.push_back(z_prev);
            out.w.push_back(w_prev);
        }
        x_prev = std::move(x);
    }
    return out;
}

}  // namespace martkit
