#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "martkit/baselines.hpp"
#include "martkit/estimate.hpp"
#include "martkit/forecast.hpp"
#include "martkit/inference.hpp"
#include "martkit/replicate.hpp"

namespace martkit::cli {

nlohmann::json matrix_json(const Matrix& m);

/// FitResult of the 2-MART estimator.
nlohmann::json fit_json(const MatrixSeries& series, const FitResult& fit, bool diagnostics);
/// Any model of the zoo.
nlohmann::json baseline_json(const MatrixSeries& series, const BaselineFit& fit, bool diagnostics);

nlohmann::json coef_inference_json(const CoefInference& inf, const CoefSet& coefs);
nlohmann::json threshold_inference_json(const ThresholdInference& th, const Thresholds& tau);

struct BenchmarkRow {
    ModelKind kind;
    int param_count = 0;
    MspeResult result;
};

nlohmann::json benchmark_json(const std::vector<BenchmarkRow>& rows, const RollingSpec& spec);
/// Wide table: a header of model names, then a `p` row and an `MSPE` row.
void write_benchmark_table(std::ostream& out, const std::vector<BenchmarkRow>& rows);

void write_replicate_records(std::ostream& out, const ReplicateSpec& spec,
                             const std::vector<ReplicateRecord>& records);
void write_replicate_summary(std::ostream& out, const ReplicateSpec& spec,
                             const std::vector<LengthSummary>& summary);
/// Density histograms per length of sqrt(T)(A1_11^ - A1_11), T(r^ - r0) and T(s^ - s0).
void write_replicate_histograms(std::ostream& out, const std::vector<ReplicateRecord>& records,
                                const std::vector<std::size_t>& lengths, int bins = 30);

}  // namespace martkit::cli
