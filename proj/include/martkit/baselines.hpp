#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "martkit/als_engine.hpp"
#include "martkit/core.hpp"
#include "martkit/estimate.hpp"

namespace martkit {

enum class ModelTag { TwoMart, Ktmar, Smart, Tmar, Tmar3, Mar, Var, Rrvar };

/// Threshold variable of the single-variable models (SMART, TMAR, TMAR(3)).
/// Auto fits both and keeps the smaller in-sample loss, z on ties.
enum class ThresholdAxis { UseZ, UseW, Auto };

struct ModelKind {
    ModelTag tag = ModelTag::TwoMart;
    int rank_k = 0;  // RRVAR only
    ThresholdAxis threshold_axis = ThresholdAxis::UseZ;
};

std::string_view to_string(ModelTag tag) noexcept;
std::string_view to_string(ThresholdAxis axis) noexcept;
/// Accepts the lower-case names used on the command line, e.g. "2mart", "tmar3".
std::optional<ModelTag> parse_model_tag(std::string_view name);
std::optional<ThresholdAxis> parse_threshold_axis(std::string_view name);

/// Free parameters including thresholds; `k` is the RRVAR rank.
int param_count(ModelTag tag, Eigen::Index m, Eigen::Index n, int k = 0);

enum class ThresholdVariable { Z, W };

/// Matrix models are stored in quadrant form: the regime of an observation is
/// quadrant_index(i, j) with i = 1 iff row variable <= r and j = 1 iff column
/// variable <= s, mapped to coefficients through `layout`. Unused thresholds
/// are +inf. Vector models (VAR, RRVAR) use `phi` on vec X.
struct BaselineFit {
    ModelKind kind;
    ThresholdAxis axis = ThresholdAxis::UseZ;  // resolved axis for single-variable models
    ThresholdVariable row_variable = ThresholdVariable::Z;
    ThresholdVariable col_variable = ThresholdVariable::W;
    Thresholds tau;
    std::vector<double> thresholds;  // the estimated ones only
    RegimeLayout layout;
    BilinearCoefs coefs;
    Matrix phi;  // mn x mn, vector models
    int rank = 0;
    double loss = 0.0;  // (1/T) sum of squared one-step residuals
    int param_count = 0;
    bool converged = true;
    bool ridge_used = false;
    std::optional<GridDiagnostics> grid;

    bool is_vector_model() const noexcept {
        return kind.tag == ModelTag::Var || kind.tag == ModelTag::Rrvar;
    }
};

/// Fits `kind` with threshold grid search where the model has thresholds.
BaselineFit fit_baseline(const MatrixSeries& series, const ModelKind& kind, const GridSpec& grid,
                         const AlsOptions& options, int threads = 1);

/// Fits a matrix model at fixed thresholds (entries unused by the model are ignored).
BaselineFit fit_baseline_at(const MatrixSeries& series, const ModelKind& kind,
                            const Thresholds& tau, const AlsOptions& options);

/// One-step conditional mean given the previous observation and thresholds.
Matrix predict_baseline(const BaselineFit& fit, const Matrix& x_prev, double z_prev,
                        double w_prev);

}  // namespace martkit
