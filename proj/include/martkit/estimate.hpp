#pragma once

#include <array>
#include <optional>
#include <vector>

#include "martkit/als_engine.hpp"
#include "martkit/core.hpp"

namespace martkit {

enum class CandidateSource {
    SampleValues,      // observed lagged threshold values
    UniformQuantiles,  // equally spaced empirical quantiles
};

/// Threshold candidates: lagged threshold values between the trim_fraction
/// and 1 - trim_fraction quantiles, thinned to max_candidates_per_axis by
/// quantile subsampling. With `refine`, the neighbourhoods of the refine_top_k
/// best coarse pairs are searched at full sample resolution, followed by
/// full-resolution sweeps along each axis until the optimum stops moving.
struct GridSpec {
    double trim_fraction = 0.1;
    int max_candidates_per_axis = 100;
    CandidateSource source = CandidateSource::SampleValues;
    bool refine = true;
    int refine_top_k = 8;
    int max_sweeps = 10;
    std::vector<double> extra_r;  // always searched
    std::vector<double> extra_s;

    void validate() const;
};

enum class InitKind { MarInit, Provided, Identity };

struct AlsOptions {
    int max_iters = 200;
    double rel_tol = 1e-8;
    double grad_tol = 1e-6;
    InitKind init = InitKind::MarInit;
    std::optional<CoefSet> provided;

    void validate() const;
    AlsControl control(bool require_gradient = true) const;
};

struct GridDiagnostics {
    std::vector<double> r_candidates;
    std::vector<double> s_candidates;
    Matrix profile_loss;  // coarse grid; NaN where a pair is not admissible
    struct Point {
        double r, s, loss;
    };
    std::vector<Point> refined;  // evaluated during refinement
};

struct FitResult {
    ThetaParams theta_hat;
    double loss = 0.0;
    std::vector<double> loss_trace;
    std::vector<Matrix> residuals;  // X_t - fitted, t = 2..T
    RegimeCounts regime_counts{};
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    bool ridge_used = false;
    bool regime_held = false;  // some A_i / B_j had no data and kept its start value
    std::optional<GridDiagnostics> grid;
};

/// L_T(theta) = (1/T) sum_{t=2..T} ||X_t - A_i X_{t-1} B_j'||_F^2.
double loss(const MatrixSeries& series, const ThetaParams& theta);

/// Residuals X_t - A_i X_{t-1} B_j' for t = 2..T.
std::vector<Matrix> residuals(const MatrixSeries& series, const ThetaParams& theta);

/// Single-regime bilinear least squares, returned as A1 = A2, B1 = B2.
CoefSet mar_init(const MatrixSeries& series, const AlsOptions& options);

/// Starting coefficients selected by options.init.
CoefSet starting_coefs(const MatrixSeries& series, const AlsOptions& options);

/// ALS at fixed thresholds.
FitResult als_fit(const MatrixSeries& series, const Thresholds& tau, const AlsOptions& options);

/// Two-dimensional grid search over (r, s) minimizing the profile loss.
/// Candidates are independent work items spread over `threads` workers;
/// ties go to the smallest r, then the smallest s.
FitResult grid_search_fit(const MatrixSeries& series, const GridSpec& grid,
                          const AlsOptions& options, int threads = 1);

/// Normal-equation residuals at theta, each scaled by 1/T:
/// for A_i: sum_j sum_t (A_i X B_j' B_j X' - X_t B_j X') I_{t,i,j}, and the
/// analogous B_j expression. Returned as (A1, A2, B1, B2).
std::array<Matrix, 4> gradient_conditions(const MatrixSeries& series, const ThetaParams& theta);

/// Minimum number of observations each marginal regime must hold.
int min_regime_occupancy(Eigen::Index m, Eigen::Index n) noexcept;

/// Sorted candidate values for one axis.
struct AxisCandidates {
    std::vector<double> full;    // every admissible value (refinement pool)
    std::vector<double> coarse;  // values searched first
};

/// `lagged` are the threshold values z_1..z_{T-1} that drive regimes.
AxisCandidates build_axis_candidates(const std::vector<double>& lagged, const GridSpec& grid,
                                     const std::vector<double>& extra, int min_occupancy);

// ---- generic quadrant search, shared with the baseline models ----

/// A model whose regimes are the four quadrants of (row variable vs r,
/// column variable vs s), in quadrant_index() order.
struct QuadrantModel {
    RegimeLayout layout;
    std::vector<double> row_lagged;  // size T-1
    std::vector<double> col_lagged;  // size T-1
    AxisCandidates row;
    AxisCandidates col;
    bool (*admissible)(double r, double s) = nullptr;  // nullptr accepts all
    // Pairs leaving quadrant q with fewer than min_count[q] observations are skipped.
    std::array<int, 4> min_count{};
};

struct QuadrantSearchResult {
    double r = 0.0;
    double s = 0.0;
    double profile_loss = 0.0;
    GridDiagnostics diagnostics;
};

/// Coarse grid, then refinement as described for GridSpec.
QuadrantSearchResult quadrant_search(const MatrixSeries& series, const QuadrantModel& model,
                                     const BilinearCoefs& init, const AlsControl& control,
                                     const GridSpec& grid, int threads);

/// Regime moments of a quadrant model at fixed (r, s).
std::vector<RegimeMoments> quadrant_moments(const MatrixSeries& series, const QuadrantModel& model,
                                            double r, double s);

/// `mar` replicated into every A and B slot of `layout`.
BilinearCoefs replicate_coefs(const CoefSet& mar, const RegimeLayout& layout);

}  // namespace martkit
