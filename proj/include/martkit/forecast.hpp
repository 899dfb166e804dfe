#pragma once

#include <functional>
#include <vector>

#include "martkit/baselines.hpp"
#include "martkit/core.hpp"
#include "martkit/estimate.hpp"

namespace martkit {

/// Rolling-origin protocol with 1-based time indices: for each origin t in
/// [test_start, test_end] the model is fitted on X_{t-train_window}..X_{t-1}
/// and X_t is forecast one step ahead. Fits are reused for refit_every
/// consecutive origins.
struct RollingSpec {
    int train_window = 0;
    int test_start = 0;
    int test_end = 0;
    int refit_every = 1;

    void validate() const;
    int origins() const noexcept { return test_end - test_start + 1; }
};

/// Forecast of X_t (1-based) from the full series; must only use data up to t-1.
using OneStepPredictor = std::function<Matrix(const MatrixSeries& series, std::size_t t)>;
/// Fits on a training window and returns its predictor.
using OneStepFitter = std::function<OneStepPredictor(const MatrixSeries& train)>;

struct MspeResult {
    double mspe = 0.0;
    std::vector<double> per_step_errors;  // ||X^_t - X_t||_F^2, one per origin in order
    int fits = 0;
};

MspeResult rolling_mspe(const MatrixSeries& series, const RollingSpec& spec,
                        const OneStepFitter& fitter, int threads = 1);

MspeResult rolling_mspe(const MatrixSeries& series, const ModelKind& kind, const RollingSpec& spec,
                        const GridSpec& grid, const AlsOptions& options, int threads = 1);

/// fit_baseline followed by predict_baseline at X_{t-1}, z_{t-1}, w_{t-1}.
OneStepFitter baseline_fitter(const ModelKind& kind, const GridSpec& grid,
                              const AlsOptions& options);

}  // namespace martkit
