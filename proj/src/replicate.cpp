#include "martkit/replicate.hpp"

#include <algorithm>
#include <cmath>

#include "martkit/error.hpp"
#include "martkit/inference.hpp"
#include "martkit/parallel.hpp"
#include "martkit/stats.hpp"

namespace martkit {

namespace {

ReplicateRecord run_one(const ReplicateSpec& spec, std::size_t length, int rep,
                        std::uint64_t seed) {
    ReplicateRecord rec;
    rec.length = length;
    rec.rep = rep;
    rec.seed = seed;
    try {
        DgpSpec dgp;
        dgp.theta = design_dgp(spec.m, spec.n);
        dgp.noise = setting_noise(spec.setting, spec.m, spec.n, seed);
        dgp.length = length;
        const MatrixSeries series = simulate_2mart(dgp);
        const FitResult fit = grid_search_fit(series, spec.grid, spec.als, 1);
        const double t = static_cast<double>(length);

        rec.estimation_error = kronecker_error(fit.theta_hat.coefs, dgp.theta.coefs);
        rec.r_hat = fit.theta_hat.tau.r;
        rec.s_hat = fit.theta_hat.tau.s;
        rec.scaled_r_error = t * (rec.r_hat - dgp.theta.tau.r);
        rec.scaled_s_error = t * (rec.s_hat - dgp.theta.tau.s);
        const Vector beta0 = flatten_beta(dgp.theta.coefs);
        rec.beta_error = std::sqrt(t) * (flatten_beta(fit.theta_hat.coefs) - beta0);

        if (spec.coef_inference) {
            const CoefInference inf = asymptotic_cov_beta(series, fit, spec.coef_level);
            int covered = 0;
            for (Eigen::Index k = 0; k < beta0.size(); ++k)
                covered += inf.intervals[static_cast<std::size_t>(k)].contains(beta0(k));
            rec.coef_coverage = static_cast<double>(covered) / static_cast<double>(beta0.size());
        }
        if (spec.threshold_inference) {
            const ThresholdInference th = threshold_ci(series, fit, spec.threshold_levels.front(),
                                                       spec.n_sims, std::nullopt, seed, 1);
            for (double level : spec.threshold_levels) {
                rec.r_covered.push_back(threshold_interval(th.m_minus_r, rec.r_hat, length, level)
                                            .contains(dgp.theta.tau.r));
                rec.s_covered.push_back(threshold_interval(th.m_minus_s, rec.s_hat, length, level)
                                            .contains(dgp.theta.tau.s));
            }
        }
        rec.ok = true;
    } catch (const Error& e) {
        rec.ok = false;
        rec.error = std::string(to_string(e.kind()));
    }
    return rec;
}

}  // namespace

void ReplicateSpec::validate() const {
    require(m >= 1 && n >= 1, ErrorKind::InvalidArgument, "dimensions must be positive");
    require(!lengths.empty(), ErrorKind::InvalidArgument, "at least one series length is needed");
    require(reps >= 1, ErrorKind::InvalidArgument, "reps must be positive");
    require(coef_level > 0.0 && coef_level < 1.0, ErrorKind::InvalidArgument,
            "coef_level must lie in (0, 1)");
    require(!threshold_levels.empty(), ErrorKind::InvalidArgument,
            "threshold_levels must not be empty");
    for (double level : threshold_levels)
        require(level > 0.0 && level < 1.0, ErrorKind::InvalidArgument,
                "threshold levels must lie in (0, 1)");
    require(n_sims >= 10, ErrorKind::InvalidArgument, "n_sims must be at least 10");
    grid.validate();
    als.validate();
}

std::vector<ReplicateRecord> run_replicates(const ReplicateSpec& spec, int threads) {
    spec.validate();
    const auto reps = static_cast<std::size_t>(spec.reps);
    std::vector<ReplicateRecord> out(spec.lengths.size() * reps);
    parallel_for(out.size(), threads, [&](std::size_t idx) {
        const std::size_t l = idx / reps;
        const int rep = static_cast<int>(idx % reps);
        out[idx] = run_one(spec, spec.lengths[l], rep, spec.seed_of(l, rep));
    });
    return out;
}

std::vector<LengthSummary> summarize(const ReplicateSpec& spec,
                                     const std::vector<ReplicateRecord>& records) {
    std::vector<LengthSummary> out;
    for (std::size_t length : spec.lengths) {
        LengthSummary s;
        s.length = length;
        std::vector<double> errors, coverage;
        s.r_ecp.assign(spec.threshold_levels.size(), 0.0);
        s.s_ecp.assign(spec.threshold_levels.size(), 0.0);
        for (const auto& rec : records) {
            if (rec.length != length) continue;
            if (!rec.ok) {
                ++s.failed;
                continue;
            }
            ++s.completed;
            errors.push_back(rec.estimation_error);
            coverage.push_back(rec.coef_coverage);
            for (std::size_t k = 0; k < rec.r_covered.size(); ++k) {
                s.r_ecp[k] += rec.r_covered[k];
                s.s_ecp[k] += rec.s_covered[k];
            }
        }
        if (s.completed > 0) {
            std::vector<double> logs(errors.size());
            std::transform(errors.begin(), errors.end(), logs.begin(),
                           [](double e) { return std::log(e); });
            s.log_error_min = *std::min_element(logs.begin(), logs.end());
            s.log_error_q1 = quantile(logs, 0.25);
            s.log_error_median = quantile(logs, 0.5);
            s.log_error_q3 = quantile(logs, 0.75);
            s.log_error_max = *std::max_element(logs.begin(), logs.end());
            s.median_error = median(errors);
            if (spec.coef_inference) s.coef_ecp = mean(coverage);
            for (std::size_t k = 0; k < s.r_ecp.size(); ++k) {
                s.r_ecp[k] /= s.completed;
                s.s_ecp[k] /= s.completed;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace martkit
