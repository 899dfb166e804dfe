#include "martkit/baselines.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <string>

#include "martkit/error.hpp"

namespace martkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> lagged(const std::vector<double>& v) {
    return {v.begin(), v.end() - 1};
}

const std::vector<double>& variable(const MatrixSeries& series, ThresholdVariable v) {
    return v == ThresholdVariable::Z ? series.z : series.w;
}

double value_of(ThresholdVariable v, double z, double w) { return v == ThresholdVariable::Z ? z : w; }

ThresholdVariable variable_of(ThresholdAxis axis) {
    return axis == ThresholdAxis::UseW ? ThresholdVariable::W : ThresholdVariable::Z;
}

bool below(double r, double s) { return r < s; }

void check_kind(const ModelKind& kind, Eigen::Index m, Eigen::Index n) {
    if (kind.tag == ModelTag::Rrvar)
        require(kind.rank_k >= 1 && kind.rank_k <= m * n, ErrorKind::InvalidArgument,
                "RRVAR rank must lie in [1, mn], got " + std::to_string(kind.rank_k));
}

int regimes_of(ModelTag tag) {
    switch (tag) {
        case ModelTag::Ktmar: return 4;
        case ModelTag::Tmar3: return 3;
        case ModelTag::Mar:
        case ModelTag::Var:
        case ModelTag::Rrvar: return 1;
        default: return 2;
    }
}

// Quadrant form of a matrix model; thresholds and candidate grids are filled by the caller.
QuadrantModel quadrant_form(const MatrixSeries& series, ModelTag tag, ThresholdAxis axis,
                            ThresholdVariable& row_var, ThresholdVariable& col_var) {
    QuadrantModel model;
    const int occ = min_regime_occupancy(series.rows(), series.cols());
    row_var = ThresholdVariable::Z;
    col_var = ThresholdVariable::W;
    switch (tag) {
        case ModelTag::TwoMart: model.layout = RegimeLayout::two_way(); break;
        case ModelTag::Ktmar:
            model.layout = RegimeLayout::per_regime(4);
            model.min_count = {occ, occ, occ, occ};
            break;
        case ModelTag::Smart:
            model.layout = RegimeLayout::two_way();
            row_var = col_var = variable_of(axis);
            break;
        case ModelTag::Tmar:
            model.layout = {2, 2, {0, 0, 1, 1}, {0, 0, 1, 1}};
            row_var = col_var = variable_of(axis);
            break;
        case ModelTag::Tmar3:
            // Quadrant (1,2) is empty when r < s.
            model.layout = {3, 3, {0, 0, 1, 2}, {0, 0, 1, 2}};
            model.admissible = below;
            model.min_count = {occ, 0, occ, occ};
            row_var = col_var = variable_of(axis);
            break;
        case ModelTag::Mar:
            model.layout = {1, 1, {0, 0, 0, 0}, {0, 0, 0, 0}};
            break;
        default: fail(ErrorKind::InvalidArgument, "not a matrix model");
    }
    model.row_lagged = lagged(variable(series, row_var));
    model.col_lagged = lagged(variable(series, col_var));
    return model;
}

double direct_loss(const MatrixSeries& series, const BaselineFit& fit) {
    double sse = 0.0;
    for (std::size_t t = 1; t < series.length(); ++t)
        sse += (series.x[t] - predict_baseline(fit, series.x[t - 1], series.z[t - 1],
                                               series.w[t - 1]))
                   .squaredNorm();
    return sse / static_cast<double>(series.length());
}

std::vector<double> estimated_thresholds(ModelTag tag, const Thresholds& tau) {
    switch (tag) {
        case ModelTag::Mar: return {};
        case ModelTag::Tmar: return {tau.r};
        default: return {tau.r, tau.s};
    }
}

BaselineFit from_two_mart(const FitResult& f, const ModelKind& kind, Eigen::Index m,
                          Eigen::Index n) {
    BaselineFit out;
    out.kind = kind;
    out.tau = f.theta_hat.tau;
    out.thresholds = {out.tau.r, out.tau.s};
    out.layout = RegimeLayout::two_way();
    const CoefSet& c = f.theta_hat.coefs;
    out.coefs = {{c.a1, c.a2}, {c.b1, c.b2}};
    out.loss = f.loss;
    out.param_count = param_count(kind.tag, m, n);
    out.converged = f.converged;
    out.ridge_used = f.ridge_used;
    out.grid = f.grid;
    return out;
}

BaselineFit fit_matrix_at(const MatrixSeries& series, const ModelKind& kind, ThresholdAxis axis,
                          const Thresholds& tau, const BilinearCoefs& init,
                          const AlsOptions& options) {
    BaselineFit out;
    out.kind = kind;
    out.axis = axis;
    const QuadrantModel model =
        quadrant_form(series, kind.tag, axis, out.row_variable, out.col_variable);
    out.tau = tau;
    if (kind.tag == ModelTag::Mar) out.tau = {kInf, kInf};
    if (kind.tag == ModelTag::Tmar) out.tau.s = kInf;
    out.thresholds = estimated_thresholds(kind.tag, out.tau);
    out.layout = model.layout;

    const auto moments = quadrant_moments(series, model, out.tau.r, out.tau.s);
    AlsOutcome als = run_als(moments, model.layout, init, options.control(),
                             1.0 / static_cast<double>(series.length()));
    normalize_components(als.coefs, model.layout, moments);
    for (const auto& a : als.coefs.a)
        require(a.allFinite(), ErrorKind::EstimationFailed, "ALS produced non-finite coefficients");
    for (const auto& b : als.coefs.b)
        require(b.allFinite(), ErrorKind::EstimationFailed, "ALS produced non-finite coefficients");
    out.coefs = std::move(als.coefs);
    out.converged = als.converged;
    out.ridge_used = als.ridge_used;
    out.param_count = param_count(kind.tag, series.rows(), series.cols());
    out.loss = direct_loss(series, out);
    return out;
}

BilinearCoefs initial_coefs(const MatrixSeries& series, const RegimeLayout& layout,
                            const AlsOptions& options) {
    return replicate_coefs(starting_coefs(series, options), layout);
}

BaselineFit fit_vector(const MatrixSeries& series, const ModelKind& kind) {
    const Eigen::Index mn = series.rows() * series.cols();
    const auto moments = accumulate_moments(series, 1, [](std::size_t) { return 0; });
    BaselineFit out;
    out.kind = kind;
    out.tau = {kInf, kInf};
    out.phi = solve_gram(moments[0].syx, moments[0].sxx, out.ridge_used);
    out.rank = static_cast<int>(mn);

    if (kind.tag == ModelTag::Rrvar && kind.rank_k < mn) {
        // Rank-k truncation in the metric of the inverse residual covariance.
        Matrix sigma = Matrix::Zero(mn, mn);
        for (std::size_t t = 1; t < series.length(); ++t) {
            const Vector e = vec(series.x[t]) - out.phi * vec(series.x[t - 1]);
            sigma.noalias() += e * e.transpose();
        }
        sigma /= static_cast<double>(series.length() - 1);
        Eigen::SelfAdjointEigenSolver<Matrix> se(sigma);
        Vector ev = se.eigenvalues();
        const double floor = 1e-8 * std::max(sigma.trace(), 1e-300) / static_cast<double>(mn);
        if (ev.minCoeff() <= floor) {
            ev.array() += floor;
            out.ridge_used = true;
        }
        const Matrix& u = se.eigenvectors();
        const Matrix half = u * ev.cwiseSqrt().asDiagonal() * u.transpose();
        const Matrix inv_half = u * ev.cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose();
        const Matrix g = inv_half * out.phi;
        const Matrix m = g * moments[0].sxx * g.transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> me(0.5 * (m + m.transpose()));
        // Eigenvalues ascend; keep the last k.
        const Matrix v = me.eigenvectors().rightCols(kind.rank_k);
        out.phi = half * v * v.transpose() * g;
        out.rank = kind.rank_k;
    }
    out.param_count = param_count(kind.tag, series.rows(), series.cols(), kind.rank_k);
    out.loss = direct_loss(series, out);
    return out;
}

void require_length(const MatrixSeries& series, ModelTag tag) {
    const int occ = min_regime_occupancy(series.rows(), series.cols());
    const auto needed = static_cast<std::size_t>(regimes_of(tag) * occ);
    require(series.length() - 1 >= needed, ErrorKind::InsufficientData,
            "series too short for " + std::string(to_string(tag)) + ": need at least " +
                std::to_string(needed + 1) + " observations");
}

BaselineFit fit_on_axis(const MatrixSeries& series, const ModelKind& kind, ThresholdAxis axis,
                        const GridSpec& grid, const AlsOptions& options, int threads) {
    const int occ = min_regime_occupancy(series.rows(), series.cols());
    ThresholdVariable rv, cv;
    QuadrantModel model = quadrant_form(series, kind.tag, axis, rv, cv);
    model.row = build_axis_candidates(model.row_lagged, grid, grid.extra_r, occ);
    if (kind.tag == ModelTag::Tmar)
        model.col = {{kInf}, {kInf}};
    else
        model.col = build_axis_candidates(model.col_lagged, grid, grid.extra_s, occ);
    const BilinearCoefs init = initial_coefs(series, model.layout, options);
    const auto search =
        quadrant_search(series, model, init, options.control(false), grid, threads);
    BaselineFit fit = fit_matrix_at(series, kind, axis, {search.r, search.s}, init, options);
    fit.grid = search.diagnostics;
    return fit;
}

}  // namespace

std::string_view to_string(ModelTag tag) noexcept {
    switch (tag) {
        case ModelTag::TwoMart: return "2mart";
        case ModelTag::Ktmar: return "ktmar";
        case ModelTag::Smart: return "smart";
        case ModelTag::Tmar: return "tmar";
        case ModelTag::Tmar3: return "tmar3";
        case ModelTag::Mar: return "mar";
        case ModelTag::Var: return "var";
        case ModelTag::Rrvar: return "rrvar";
    }
    return "unknown";
}

std::string_view to_string(ThresholdAxis axis) noexcept {
    switch (axis) {
        case ThresholdAxis::UseZ: return "z";
        case ThresholdAxis::UseW: return "w";
        case ThresholdAxis::Auto: return "auto";
    }
    return "unknown";
}

std::optional<ModelTag> parse_model_tag(std::string_view name) {
    for (ModelTag t : {ModelTag::TwoMart, ModelTag::Ktmar, ModelTag::Smart, ModelTag::Tmar,
                       ModelTag::Tmar3, ModelTag::Mar, ModelTag::Var, ModelTag::Rrvar})
        if (name == to_string(t)) return t;
    if (name == "2-mart" || name == "twomart") return ModelTag::TwoMart;
    return std::nullopt;
}

std::optional<ThresholdAxis> parse_threshold_axis(std::string_view name) {
    for (ThresholdAxis a : {ThresholdAxis::UseZ, ThresholdAxis::UseW, ThresholdAxis::Auto})
        if (name == to_string(a)) return a;
    return std::nullopt;
}

int param_count(ModelTag tag, Eigen::Index m, Eigen::Index n, int k) {
    const auto q = static_cast<int>(m * m + n * n);
    const auto mn = static_cast<int>(m * n);
    switch (tag) {
        case ModelTag::TwoMart: return 2 * q + 2;
        case ModelTag::Ktmar: return 4 * q + 2;
        case ModelTag::Smart: return 2 * q + 2;
        case ModelTag::Tmar: return 2 * q + 1;
        case ModelTag::Tmar3: return 3 * q + 2;
        case ModelTag::Mar: return q;
        case ModelTag::Var: return mn * mn;
        case ModelTag::Rrvar: return 2 * mn * k;
    }
    return 0;
}

BaselineFit fit_baseline(const MatrixSeries& series, const ModelKind& kind, const GridSpec& grid,
                         const AlsOptions& options, int threads) {
    series.validate();
    grid.validate();
    options.validate();
    check_kind(kind, series.rows(), series.cols());
    require_length(series, kind.tag);

    switch (kind.tag) {
        case ModelTag::TwoMart:
            return from_two_mart(grid_search_fit(series, grid, options, threads), kind,
                                 series.rows(), series.cols());
        case ModelTag::Var:
        case ModelTag::Rrvar: return fit_vector(series, kind);
        case ModelTag::Mar:
            return fit_matrix_at(series, kind, ThresholdAxis::UseZ, {kInf, kInf},
                                 initial_coefs(series, {1, 1, {0, 0, 0, 0}, {0, 0, 0, 0}}, options),
                                 options);
        case ModelTag::Ktmar: return fit_on_axis(series, kind, ThresholdAxis::UseZ, grid, options, threads);
        default: break;
    }
    if (kind.threshold_axis != ThresholdAxis::Auto)
        return fit_on_axis(series, kind, kind.threshold_axis, grid, options, threads);
    BaselineFit on_z = fit_on_axis(series, kind, ThresholdAxis::UseZ, grid, options, threads);
    BaselineFit on_w = fit_on_axis(series, kind, ThresholdAxis::UseW, grid, options, threads);
    return on_w.loss < on_z.loss ? on_w : on_z;
}

BaselineFit fit_baseline_at(const MatrixSeries& series, const ModelKind& kind,
                            const Thresholds& tau, const AlsOptions& options) {
    series.validate();
    options.validate();
    check_kind(kind, series.rows(), series.cols());
    require(series.length() >= 3, ErrorKind::InsufficientData, "need at least three observations");
    switch (kind.tag) {
        case ModelTag::TwoMart:
            return from_two_mart(als_fit(series, tau, options), kind, series.rows(), series.cols());
        case ModelTag::Var:
        case ModelTag::Rrvar: return fit_vector(series, kind);
        default: break;
    }
    const ThresholdAxis axis = kind.threshold_axis == ThresholdAxis::Auto ? ThresholdAxis::UseZ
                                                                          : kind.threshold_axis;
    ThresholdVariable rv, cv;
    const RegimeLayout layout = quadrant_form(series, kind.tag, axis, rv, cv).layout;
    return fit_matrix_at(series, kind, axis, tau, initial_coefs(series, layout, options), options);
}

Matrix predict_baseline(const BaselineFit& fit, const Matrix& x_prev, double z_prev,
                        double w_prev) {
    if (fit.is_vector_model()) {
        require(fit.phi.cols() == x_prev.size(), ErrorKind::InvalidArgument,
                "previous observation does not match the fitted dimensions");
        return unvec(fit.phi * vec(x_prev), x_prev.rows(), x_prev.cols());
    }
    require(!fit.coefs.a.empty() && fit.coefs.a.front().rows() == x_prev.rows() &&
                fit.coefs.b.front().rows() == x_prev.cols(),
            ErrorKind::InvalidArgument, "previous observation does not match the fitted dimensions");
    if (fit.kind.tag == ModelTag::TwoMart) {
        ThetaParams theta;
        theta.coefs = {fit.coefs.a[0], fit.coefs.a[1], fit.coefs.b[0], fit.coefs.b[1]};
        theta.tau = fit.tau;
        return predict_one(x_prev, theta, z_prev, w_prev);
    }
    const int i = value_of(fit.row_variable, z_prev, w_prev) <= fit.tau.r ? 1 : 2;
    const int j = value_of(fit.col_variable, z_prev, w_prev) <= fit.tau.s ? 1 : 2;
    const auto q = static_cast<std::size_t>(quadrant_index({i, j}));
    const Matrix& a = fit.coefs.a[static_cast<std::size_t>(fit.layout.a_index[q])];
    const Matrix& b = fit.coefs.b[static_cast<std::size_t>(fit.layout.b_index[q])];
    return a * x_prev * b.transpose();
}

}  // namespace martkit
