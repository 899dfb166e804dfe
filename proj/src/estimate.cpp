#include "martkit/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "martkit/parallel.hpp"
#include "martkit/stats.hpp"

namespace martkit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_regression(const MatrixSeries& series) {
    series.validate();
    require(series.length() >= 2, ErrorKind::InsufficientData,
            "at least two observations are needed");
}

void sort_unique(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::vector<double> lagged(const std::vector<double>& v) {
    return std::vector<double>(v.begin(), v.end() - 1);
}

std::vector<Matrix> identity_like(int count, Eigen::Index size) {
    return std::vector<Matrix>(static_cast<std::size_t>(count), Matrix::Identity(size, size));
}

CoefSet to_coefset(const BilinearCoefs& c) {
    CoefSet out;
    out.a1 = c.a[0];
    out.a2 = c.a[1];
    out.b1 = c.b[0];
    out.b2 = c.b[1];
    return out;
}

BilinearCoefs from_coefset(const CoefSet& c) { return {{c.a1, c.a2}, {c.b1, c.b2}}; }

std::vector<RegimeMoments> two_way_moments(const MatrixSeries& series, const Thresholds& tau) {
    return accumulate_moments(series, 4, [&](std::size_t t) {
        return quadrant_index(classify_regime(series.z[t - 1], series.w[t - 1], tau));
    });
}

FitResult fit_at(const MatrixSeries& series, const Thresholds& tau, const AlsOptions& options,
                 const CoefSet& start) {
    const auto moments = two_way_moments(series, tau);
    const double scale = 1.0 / static_cast<double>(series.length());
    const AlsOutcome als =
        run_als(moments, RegimeLayout::two_way(), from_coefset(start), options.control(), scale);

    FitResult fit;
    CoefSet coefs = to_coefset(als.coefs);
    require(coefs.a1.allFinite() && coefs.a2.allFinite() && coefs.b1.allFinite() &&
                coefs.b2.allFinite(),
            ErrorKind::EstimationFailed, "ALS produced non-finite coefficients");
    fit.theta_hat.coefs = normalize(coefs);
    fit.theta_hat.tau = tau;
    fit.loss = loss(series, fit.theta_hat);
    fit.loss_trace = als.loss_trace;
    fit.residuals = residuals(series, fit.theta_hat);
    fit.regime_counts = regime_counts(series, tau);
    fit.converged = als.converged;
    fit.iterations = als.iterations;
    fit.gradient_norm = als.gradient_norm;
    fit.ridge_used = als.ridge_used;
    for (bool held : als.a_held) fit.regime_held = fit.regime_held || held;
    for (bool held : als.b_held) fit.regime_held = fit.regime_held || held;
    return fit;
}

// Lexicographic (loss, r, s) order; non-finite losses never win.
struct Best {
    double loss = kInf;
    double r = kInf;
    double s = kInf;

    void offer(double l, double rr, double ss) {
        if (!std::isfinite(l)) return;
        if (l < loss || (l == loss && (rr < r || (rr == r && ss < s)))) {
            loss = l;
            r = rr;
            s = ss;
        }
    }
};

// Bins so that col <= cols[b] iff bin <= b.
std::vector<int> column_bins(const std::vector<double>& col_lagged, const std::vector<double>& cols) {
    std::vector<int> bins(col_lagged.size());
    for (std::size_t t = 0; t < col_lagged.size(); ++t)
        bins[t] = static_cast<int>(std::lower_bound(cols.begin(), cols.end(), col_lagged[t]) -
                                   cols.begin());
    return bins;
}

class QuadrantEvaluator {
public:
    QuadrantEvaluator(const MatrixSeries& series, const QuadrantModel& model,
                      const BilinearCoefs& init, const AlsControl& control)
        : series_(series), model_(model), init_(init), control_(control),
          scale_(1.0 / static_cast<double>(series.length())),
          mn_(series.rows() * series.cols()) {
        xs_.reserve(series.length());
        for (const auto& x : series.x) xs_.push_back(vec(x));
    }

    // Profile losses at (r, cols[b]) for every b; NaN where not admissible.
    std::vector<double> row(double r, const std::vector<double>& cols,
                            const std::vector<int>& bins) const {
        const std::size_t L = cols.size();
        std::vector<std::vector<RegimeMoments>> cells(
            2, std::vector<RegimeMoments>(L + 1, RegimeMoments(mn_)));
        for (std::size_t t = 1; t < series_.length(); ++t) {
            const int side = model_.row_lagged[t - 1] <= r ? 0 : 1;
            cells[side][static_cast<std::size_t>(bins[t - 1])].add(xs_[t - 1], xs_[t]);
        }
        // suffix[side][b] covers bins b+1..L.
        std::vector<std::vector<RegimeMoments>> suffix(
            2, std::vector<RegimeMoments>(L, RegimeMoments(mn_)));
        for (int side = 0; side < 2; ++side) {
            RegimeMoments acc = cells[side][L];
            for (std::size_t b = L; b-- > 0;) {
                suffix[side][b] = acc;
                acc += cells[side][b];
            }
        }
        std::vector<double> out(L, kNaN);
        std::vector<RegimeMoments> prefix(2, RegimeMoments(mn_));
        std::vector<RegimeMoments> moments(4);
        for (std::size_t b = 0; b < L; ++b) {
            prefix[0] += cells[0][b];
            prefix[1] += cells[1][b];
            if (model_.admissible && !model_.admissible(r, cols[b])) continue;
            moments[0] = prefix[0];
            moments[1] = suffix[0][b];
            moments[2] = prefix[1];
            moments[3] = suffix[1][b];
            bool occupied = true;
            for (std::size_t q = 0; q < 4; ++q) occupied &= moments[q].count >= model_.min_count[q];
            if (!occupied) continue;
            const AlsOutcome als = run_als(moments, model_.layout, init_, control_, scale_);
            out[b] = std::isfinite(als.loss) ? als.loss : kNaN;
        }
        return out;
    }

private:
    const MatrixSeries& series_;
    const QuadrantModel& model_;
    const BilinearCoefs& init_;
    AlsControl control_;
    double scale_;
    Eigen::Index mn_;
    std::vector<Vector> xs_;
};

// Values of `full` strictly between the coarse neighbours of coarse[idx].
std::vector<double> refinement_window(const AxisCandidates& axis, std::size_t idx) {
    const double lo = idx == 0 ? -kInf : axis.coarse[idx - 1];
    const double hi = idx + 1 == axis.coarse.size() ? kInf : axis.coarse[idx + 1];
    std::vector<double> out;
    for (double v : axis.full)
        if (v > lo && v < hi) out.push_back(v);
    if (out.empty()) out.push_back(axis.coarse[idx]);
    return out;
}

Matrix evaluate_grid(const QuadrantEvaluator& eval, const std::vector<double>& rows,
                     const std::vector<double>& cols, const std::vector<double>& col_lagged,
                     int threads) {
    const auto bins = column_bins(col_lagged, cols);
    std::vector<std::vector<double>> results(rows.size());
    parallel_for(rows.size(), threads,
                 [&](std::size_t a) { results[a] = eval.row(rows[a], cols, bins); });
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b)
            out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = results[a][b];
    return out;
}

}  // namespace

CoefSet starting_coefs(const MatrixSeries& series, const AlsOptions& options) {
    const auto m = series.rows();
    const auto n = series.cols();
    switch (options.init) {
        case InitKind::MarInit: return mar_init(series, options);
        case InitKind::Identity: {
            CoefSet c;
            c.a1 = c.a2 = Matrix::Identity(m, m);
            c.b1 = c.b2 = Matrix::Identity(n, n);
            return c;
        }
        case InitKind::Provided: {
            const CoefSet& c = *options.provided;
            c.validate();
            require(c.rows() == m && c.cols() == n, ErrorKind::InvalidArgument,
                    "provided starting coefficients do not match the series dimensions");
            return c;
        }
    }
    return {};
}

void GridSpec::validate() const {
    require(trim_fraction >= 0.0 && trim_fraction < 0.5, ErrorKind::InvalidArgument,
            "trim_fraction must lie in [0, 0.5)");
    require(max_candidates_per_axis >= 1, ErrorKind::InvalidArgument,
            "max_candidates_per_axis must be positive");
    require(refine_top_k >= 1 && max_sweeps >= 0, ErrorKind::InvalidArgument,
            "refine_top_k must be positive and max_sweeps non-negative");
    for (double v : extra_r)
        require(std::isfinite(v), ErrorKind::InvalidArgument, "extra_r values must be finite");
    for (double v : extra_s)
        require(std::isfinite(v), ErrorKind::InvalidArgument, "extra_s values must be finite");
}

void AlsOptions::validate() const {
    require(max_iters >= 1, ErrorKind::InvalidArgument, "max_iters must be at least 1");
    require(rel_tol > 0.0 && grad_tol > 0.0, ErrorKind::InvalidArgument,
            "ALS tolerances must be positive");
    require(init != InitKind::Provided || provided.has_value(), ErrorKind::InvalidArgument,
            "init = provided requires starting coefficients");
}

AlsControl AlsOptions::control(bool require_gradient) const {
    return {max_iters, rel_tol, grad_tol, require_gradient};
}

double loss(const MatrixSeries& series, const ThetaParams& theta) {
    require_regression(series);
    double total = 0.0;
    for (std::size_t t = 1; t < series.length(); ++t)
        total += (series.x[t] - predict_one(series.x[t - 1], theta, series.z[t - 1],
                                            series.w[t - 1]))
                     .squaredNorm();
    return total / static_cast<double>(series.length());
}

std::vector<Matrix> residuals(const MatrixSeries& series, const ThetaParams& theta) {
    require_regression(series);
    std::vector<Matrix> out;
    out.reserve(series.length() - 1);
    for (std::size_t t = 1; t < series.length(); ++t)
        out.push_back(series.x[t] -
                      predict_one(series.x[t - 1], theta, series.z[t - 1], series.w[t - 1]));
    return out;
}

std::array<Matrix, 4> gradient_conditions(const MatrixSeries& series, const ThetaParams& theta) {
    require_regression(series);
    const auto& c = theta.coefs;
    std::array<Matrix, 4> g{Matrix::Zero(c.rows(), c.rows()), Matrix::Zero(c.rows(), c.rows()),
                            Matrix::Zero(c.cols(), c.cols()), Matrix::Zero(c.cols(), c.cols())};
    for (std::size_t t = 1; t < series.length(); ++t) {
        const auto label = classify_regime(series.z[t - 1], series.w[t - 1], theta.tau);
        const Matrix& a = c.a(label.i);
        const Matrix& b = c.b(label.j);
        const Matrix& x = series.x[t - 1];
        const Matrix resid = a * x * b.transpose() - series.x[t];
        g[label.i - 1] += resid * b * x.transpose();
        g[2 + label.j - 1] += resid.transpose() * a * x;
    }
    const double scale = 1.0 / static_cast<double>(series.length());
    for (auto& m : g) m *= scale;
    return g;
}

CoefSet mar_init(const MatrixSeries& series, const AlsOptions& options) {
    require_regression(series);
    options.validate();
    const auto m = series.rows();
    const auto n = series.cols();
    const auto moments = accumulate_moments(series, 1, [](std::size_t) { return 0; });

    // Unrestricted VAR(1), then its nearest Kronecker product:
    // R[(k,l),(p,q)] = Phi[p + m k, q + m l] = B(k,l) A(p,q).
    bool ridge = false;
    const Matrix phi = solve_gram(moments[0].syx, moments[0].sxx, ridge);
    Matrix rearranged(n * n, m * m);
    for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index q = 0; q < m; ++q)
                for (Eigen::Index p = 0; p < m; ++p)
                    rearranged(k + n * l, p + m * q) = phi(p + m * k, q + m * l);
    Eigen::JacobiSVD<Matrix> svd(rearranged, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma = svd.singularValues()(0);
    BilinearCoefs start;
    if (sigma > 0.0 && std::isfinite(sigma)) {
        start.a = {unvec(std::sqrt(sigma) * svd.matrixV().col(0), m, m)};
        start.b = {unvec(std::sqrt(sigma) * svd.matrixU().col(0), n, n)};
    } else {
        start.a = identity_like(1, m);
        start.b = identity_like(1, n);
    }
    const AlsOutcome als = run_als(moments, RegimeLayout::per_regime(1), std::move(start),
                                   options.control(), 1.0 / static_cast<double>(series.length()));
    CoefSet out;
    out.a1 = out.a2 = als.coefs.a[0];
    out.b1 = out.b2 = als.coefs.b[0];
    require(out.a1.allFinite() && out.b1.allFinite(), ErrorKind::EstimationFailed,
            "MAR initialization produced non-finite coefficients");
    if (out.a1.norm() == 0.0) {
        // Zero autoregression: any unit-norm A represents it.
        out.a1 = out.a2 = Matrix::Identity(m, m) / std::sqrt(static_cast<double>(m));
        out.b1 = out.b2 = Matrix::Zero(n, n);
        out.normalized = true;
        return out;
    }
    return normalize(out);
}

FitResult als_fit(const MatrixSeries& series, const Thresholds& tau, const AlsOptions& options) {
    require_regression(series);
    options.validate();
    require(std::isfinite(tau.r) && std::isfinite(tau.s), ErrorKind::InvalidArgument,
            "thresholds must be finite");
    return fit_at(series, tau, options, starting_coefs(series, options));
}

int min_regime_occupancy(Eigen::Index m, Eigen::Index n) noexcept {
    return static_cast<int>(std::max(m * m, n * n)) + 1;
}

AxisCandidates build_axis_candidates(const std::vector<double>& lagged, const GridSpec& grid,
                                     const std::vector<double>& extra, int min_occupancy) {
    grid.validate();
    require(!lagged.empty(), ErrorKind::InsufficientData, "no threshold values to search");
    std::vector<double> sorted = lagged;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t count = sorted.size();

    std::vector<double> pool;
    if (grid.source == CandidateSource::SampleValues) {
        const auto cut = static_cast<std::size_t>(std::floor(grid.trim_fraction *
                                                             static_cast<double>(count)));
        for (std::size_t k = cut; k + cut < count; ++k) pool.push_back(sorted[k]);
    } else {
        const int k_max = grid.max_candidates_per_axis;
        const double lo = grid.trim_fraction;
        const double hi = 1.0 - grid.trim_fraction;
        for (int k = 0; k < k_max; ++k) {
            const double p = k_max == 1 ? 0.5 : lo + (hi - lo) * k / (k_max - 1);
            pool.push_back(quantile_sorted(sorted, p));
        }
    }
    sort_unique(pool);

    AxisCandidates out;
    for (double v : pool) {
        const auto below =
            static_cast<int>(std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
        if (below >= min_occupancy && static_cast<int>(count) - below >= min_occupancy)
            out.full.push_back(v);
    }
    const auto limit = static_cast<std::size_t>(grid.max_candidates_per_axis);
    if (out.full.size() <= limit) {
        out.coarse = out.full;
    } else if (limit == 1) {
        out.coarse = {out.full[(out.full.size() - 1) / 2]};
    } else {
        const double span = static_cast<double>(out.full.size() - 1);
        for (std::size_t k = 0; k < limit; ++k)
            out.coarse.push_back(out.full[static_cast<std::size_t>(
                std::lround(static_cast<double>(k) * span / static_cast<double>(limit - 1)))]);
        sort_unique(out.coarse);
    }
    for (double v : extra) {
        out.full.push_back(v);
        out.coarse.push_back(v);
    }
    sort_unique(out.full);
    sort_unique(out.coarse);
    return out;
}

std::vector<RegimeMoments> quadrant_moments(const MatrixSeries& series, const QuadrantModel& model,
                                            double r, double s) {
    return accumulate_moments(series, 4, [&](std::size_t t) {
        const int i = model.row_lagged[t - 1] <= r ? 1 : 2;
        const int j = model.col_lagged[t - 1] <= s ? 1 : 2;
        return quadrant_index({i, j});
    });
}

BilinearCoefs replicate_coefs(const CoefSet& mar, const RegimeLayout& layout) {
    BilinearCoefs c;
    c.a.assign(static_cast<std::size_t>(layout.n_a), mar.a1);
    c.b.assign(static_cast<std::size_t>(layout.n_b), mar.b1);
    return c;
}

QuadrantSearchResult quadrant_search(const MatrixSeries& series, const QuadrantModel& model,
                                     const BilinearCoefs& init, const AlsControl& control,
                                     const GridSpec& grid, int threads) {
    require(model.layout.regimes() == 4, ErrorKind::InvalidArgument,
            "quadrant models have four regimes");
    require(model.row_lagged.size() + 1 == series.length() &&
                model.col_lagged.size() + 1 == series.length(),
            ErrorKind::InvalidArgument, "lagged threshold values must have length T - 1");
    require(!model.row.coarse.empty() && !model.col.coarse.empty(), ErrorKind::InsufficientData,
            "no admissible threshold candidates; the series is too short for the grid");

    const QuadrantEvaluator eval(series, model, init, control);
    QuadrantSearchResult out;
    auto& diag = out.diagnostics;
    diag.r_candidates = model.row.coarse;
    diag.s_candidates = model.col.coarse;
    diag.profile_loss = evaluate_grid(eval, model.row.coarse, model.col.coarse, model.col_lagged,
                                      threads);

    Best best;
    for (Eigen::Index a = 0; a < diag.profile_loss.rows(); ++a)
        for (Eigen::Index b = 0; b < diag.profile_loss.cols(); ++b)
            best.offer(diag.profile_loss(a, b), model.row.coarse[a], model.col.coarse[b]);
    require(std::isfinite(best.loss), ErrorKind::EstimationFailed,
            "every threshold candidate was inadmissible or degenerate");

    if (grid.refine) {
        const auto index_of = [](const std::vector<double>& v, double x) {
            return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
        };
        const auto record = [&](const std::vector<double>& rows, const std::vector<double>& cols) {
            const Matrix local = evaluate_grid(eval, rows, cols, model.col_lagged, threads);
            for (std::size_t a = 0; a < rows.size(); ++a)
                for (std::size_t b = 0; b < cols.size(); ++b) {
                    const double l =
                        local(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                    diag.refined.push_back({rows[a], cols[b], l});
                    best.offer(l, rows[a], cols[b]);
                }
        };

        // Windows around the best coarse pairs.
        std::vector<Best> ranked;
        for (Eigen::Index a = 0; a < diag.profile_loss.rows(); ++a)
            for (Eigen::Index b = 0; b < diag.profile_loss.cols(); ++b)
                if (std::isfinite(diag.profile_loss(a, b)))
                    ranked.push_back({diag.profile_loss(a, b), model.row.coarse[a],
                                      model.col.coarse[b]});
        const auto keep =
            std::min(ranked.size(), static_cast<std::size_t>(grid.refine_top_k));
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                          ranked.end(), [](const Best& x, const Best& y) {
                              return std::tie(x.loss, x.r, x.s) < std::tie(y.loss, y.r, y.s);
                          });
        for (std::size_t k = 0; k < keep; ++k) {
            const auto rows = refinement_window(model.row, index_of(model.row.coarse, ranked[k].r));
            const auto cols = refinement_window(model.col, index_of(model.col.coarse, ranked[k].s));
            if (rows.size() > 1 || cols.size() > 1) record(rows, cols);
        }

        // Full-resolution coordinate sweeps.
        for (int sweep = 0; sweep < grid.max_sweeps; ++sweep) {
            const double r0 = best.r, s0 = best.s;
            if (model.row.full.size() > 1) record(model.row.full, {best.s});
            if (model.col.full.size() > 1) record({best.r}, model.col.full);
            if (best.r == r0 && best.s == s0) break;
        }
    }
    out.r = best.r;
    out.s = best.s;
    out.profile_loss = best.loss;
    return out;
}

FitResult grid_search_fit(const MatrixSeries& series, const GridSpec& grid,
                          const AlsOptions& options, int threads) {
    require_regression(series);
    grid.validate();
    options.validate();
    const int occupancy = min_regime_occupancy(series.rows(), series.cols());
    require(series.length() - 1 >= static_cast<std::size_t>(2 * occupancy),
            ErrorKind::InsufficientData,
            "series too short: each regime needs at least " + std::to_string(occupancy) +
                " observations");

    QuadrantModel model;
    model.layout = RegimeLayout::two_way();
    model.row_lagged = lagged(series.z);
    model.col_lagged = lagged(series.w);
    model.row = build_axis_candidates(model.row_lagged, grid, grid.extra_r, occupancy);
    model.col = build_axis_candidates(model.col_lagged, grid, grid.extra_s, occupancy);

    const CoefSet start = starting_coefs(series, options);
    const auto search =
        quadrant_search(series, model, from_coefset(start), options.control(false), grid, threads);
    FitResult fit = fit_at(series, {search.r, search.s}, options, start);
    fit.grid = search.diagnostics;
    return fit;
}

}  // namespace martkit
