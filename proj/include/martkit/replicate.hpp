#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "martkit/estimate.hpp"
#include "martkit/simulate.hpp"

namespace martkit {

/// Monte Carlo study on the simulation design of design_dgp(m, n).
/// Replicate k at length index l uses seed root_seed + l * reps + k for the
/// noise, the Setting II factors and the threshold simulations.
struct ReplicateSpec {
    Setting setting = Setting::I;
    Eigen::Index m = 3;
    Eigen::Index n = 2;
    std::vector<std::size_t> lengths{1000};
    int reps = 100;
    std::uint64_t root_seed = 1;
    GridSpec grid;
    AlsOptions als;
    bool coef_inference = true;
    double coef_level = 0.95;
    bool threshold_inference = false;
    std::vector<double> threshold_levels{0.90, 0.95, 0.99};
    int n_sims = 1000;

    void validate() const;
    std::uint64_t seed_of(std::size_t length_index, int rep) const noexcept {
        return root_seed + static_cast<std::uint64_t>(length_index) * static_cast<std::uint64_t>(reps) +
               static_cast<std::uint64_t>(rep);
    }
};

struct ReplicateRecord {
    std::size_t length = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;  // error category when !ok
    double estimation_error = 0.0;  // sum_ij ||B^_j kron A^_i - B_j kron A_i||^2
    double r_hat = 0.0;
    double s_hat = 0.0;
    double scaled_r_error = 0.0;  // T (r^ - r0)
    double scaled_s_error = 0.0;
    Vector beta_error;            // sqrt(T) (beta^ - beta0)
    double coef_coverage = 0.0;   // fraction of beta entries covered
    std::vector<bool> r_covered;  // per threshold level
    std::vector<bool> s_covered;
};

std::vector<ReplicateRecord> run_replicates(const ReplicateSpec& spec, int threads = 1);

struct LengthSummary {
    std::size_t length = 0;
    int completed = 0;
    int failed = 0;
    // Quartiles of log estimation error (box-plot data).
    double log_error_min = 0.0, log_error_q1 = 0.0, log_error_median = 0.0,
           log_error_q3 = 0.0, log_error_max = 0.0;
    double median_error = 0.0;  // on the raw scale
    double coef_ecp = 0.0;
    std::vector<double> r_ecp;  // per threshold level
    std::vector<double> s_ecp;
};

std::vector<LengthSummary> summarize(const ReplicateSpec& spec,
                                     const std::vector<ReplicateRecord>& records);

}  // namespace martkit
