#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "martkit/io.hpp"

namespace martkit::cli {

namespace {

using nlohmann::json;

// JSON has no infinities; unused thresholds and empty grid cells become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json tau_json(const Thresholds& tau) { return {{"r", num(tau.r)}, {"s", num(tau.s)}}; }

json grid_json(const GridDiagnostics& g) {
    json refined = json::array();
    for (const auto& p : g.refined) refined.push_back({num(p.r), num(p.s), num(p.loss)});
    return {{"r_candidates", g.r_candidates},
            {"s_candidates", g.s_candidates},
            {"profile_loss", matrix_json(g.profile_loss)},
            {"refined", std::move(refined)}};
}

std::string entry_name(Eigen::Index k, Eigen::Index m, Eigen::Index n) {
    const Eigen::Index mm = m * m, nn = n * n;
    std::string block;
    Eigen::Index off = k, rows = m;
    if (k < mm) {
        block = "A1";
    } else if (k < 2 * mm) {
        block = "A2", off = k - mm;
    } else if (k < 2 * mm + nn) {
        block = "B1", off = k - 2 * mm, rows = n;
    } else {
        block = "B2", off = k - 2 * mm - nn, rows = n;
    }
    // column-major
    return block + "[" + std::to_string(off % rows + 1) + "," + std::to_string(off / rows + 1) + "]";
}

std::string pct(double level) {
    return std::to_string(static_cast<int>(std::lround(level * 100.0)));
}

}  // namespace

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

json fit_json(const MatrixSeries& series, const FitResult& fit, bool diagnostics) {
    const CoefSet& c = fit.theta_hat.coefs;
    json counts = json::array();
    for (const auto& row : fit.regime_counts) counts.push_back(row);
    json out = {
        {"model", "2mart"},
        {"m", series.rows()},
        {"n", series.cols()},
        {"length", series.length()},
        {"param_count", param_count(ModelTag::TwoMart, series.rows(), series.cols())},
        {"thresholds", {num(fit.theta_hat.tau.r), num(fit.theta_hat.tau.s)}},
        {"tau", tau_json(fit.theta_hat.tau)},
        {"loss", num(fit.loss)},
        {"converged", fit.converged},
        {"ridge_used", fit.ridge_used},
        {"coefficients",
         {{"a", {matrix_json(c.a1), matrix_json(c.a2)}},
          {"b", {matrix_json(c.b1), matrix_json(c.b2)}},
          {"a_index", {0, 0, 1, 1}},
          {"b_index", {0, 1, 0, 1}}}},
        {"two_mart",
         {{"regime_counts", std::move(counts)},
          {"iterations", fit.iterations},
          {"gradient_norm", num(fit.gradient_norm)},
          {"regime_held", fit.regime_held},
          {"loss_trace", fit.loss_trace}}},
    };
    if (diagnostics && fit.grid) out["grid"] = grid_json(*fit.grid);
    return out;
}

json baseline_json(const MatrixSeries& series, const BaselineFit& fit, bool diagnostics) {
    json out = {
        {"model", std::string(to_string(fit.kind.tag))},
        {"m", series.rows()},
        {"n", series.cols()},
        {"length", series.length()},
        {"param_count", fit.param_count},
        {"thresholds", json::array()},
        {"tau", tau_json(fit.tau)},
        {"loss", num(fit.loss)},
        {"converged", fit.converged},
        {"ridge_used", fit.ridge_used},
    };
    for (double v : fit.thresholds) out["thresholds"].push_back(num(v));
    switch (fit.kind.tag) {
        case ModelTag::Smart:
        case ModelTag::Tmar:
        case ModelTag::Tmar3:
            out["axis"] = std::string(to_string(fit.axis));
            break;
        default:
            break;
    }
    if (fit.is_vector_model()) {
        out["phi"] = matrix_json(fit.phi);
        if (fit.kind.tag == ModelTag::Rrvar) out["rank"] = fit.rank;
    } else {
        json a = json::array(), b = json::array();
        for (const Matrix& m : fit.coefs.a) a.push_back(matrix_json(m));
        for (const Matrix& m : fit.coefs.b) b.push_back(matrix_json(m));
        out["coefficients"] = {{"a", std::move(a)},
                               {"b", std::move(b)},
                               {"a_index", fit.layout.a_index},
                               {"b_index", fit.layout.b_index}};
    }
    if (diagnostics && fit.grid) out["grid"] = grid_json(*fit.grid);
    return out;
}

json coef_inference_json(const CoefInference& inf, const CoefSet& coefs) {
    const Eigen::Index m = coefs.rows(), n = coefs.cols();
    const double t = static_cast<double>(inf.length);
    json entries = json::array();
    for (Eigen::Index k = 0; k < inf.beta_hat.size(); ++k) {
        const Interval& iv = inf.intervals[static_cast<std::size_t>(k)];
        entries.push_back({{"name", entry_name(k, m, n)},
                           {"estimate", num(inf.beta_hat(k))},
                           {"std_error", num(std::sqrt(inf.xi_hat(k, k) / t))},
                           {"lower", num(iv.lower)},
                           {"upper", num(iv.upper)}});
    }
    return {{"level", inf.intervals.empty() ? 0.0 : inf.intervals.front().level},
            {"length", inf.length},
            {"h_condition", num(inf.h_condition)},
            {"entries", std::move(entries)},
            {"sigma_hat", matrix_json(inf.sigma_hat)},
            {"xi_hat", matrix_json(inf.xi_hat)}};
}

json threshold_inference_json(const ThresholdInference& th, const Thresholds& tau) {
    auto interval = [](double estimate, const Interval& iv) {
        return json{{"estimate", num(estimate)}, {"lower", num(iv.lower)}, {"upper", num(iv.upper)}};
    };
    json means = json::array();
    for (double v : th.jump_means) means.push_back(num(v));
    return {{"level", th.r_interval.level},
            {"n_sims", th.n_sims},
            {"bandwidth_z", num(th.bandwidth_z)},
            {"bandwidth_w", num(th.bandwidth_w)},
            {"jump_rate_r", num(th.jump_rate_r)},
            {"jump_rate_s", num(th.jump_rate_s)},
            {"jump_means", std::move(means)},
            {"r", interval(tau.r, th.r_interval)},
            {"s", interval(tau.s, th.s_interval)}};
}

json benchmark_json(const std::vector<BenchmarkRow>& rows, const RollingSpec& spec) {
    json models = json::array();
    for (const auto& row : rows) {
        json errs = json::array();
        for (double e : row.result.per_step_errors) errs.push_back(num(e));
        models.push_back({{"model", std::string(to_string(row.kind.tag))},
                          {"param_count", row.param_count},
                          {"mspe", num(row.result.mspe)},
                          {"fits", row.result.fits},
                          {"per_step_errors", std::move(errs)}});
    }
    return {{"rolling",
             {{"train_window", spec.train_window},
              {"test_start", spec.test_start},
              {"test_end", spec.test_end},
              {"refit_every", spec.refit_every}}},
            {"models", std::move(models)}};
}

void write_benchmark_table(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    out << "metric";
    for (const auto& row : rows) out << ',' << to_string(row.kind.tag);
    out << "\np";
    for (const auto& row : rows) out << ',' << row.param_count;
    out << "\nMSPE";
    for (const auto& row : rows) out << ',' << format_double(row.result.mspe);
    out << '\n';
}

void write_replicate_records(std::ostream& out, const ReplicateSpec& spec,
                             const std::vector<ReplicateRecord>& records) {
    out << "length,rep,seed,ok,error,estimation_error,r_hat,s_hat,scaled_r_error,scaled_s_error,"
           "coef_coverage";
    for (double level : spec.threshold_levels) out << ",r_covered_" << pct(level);
    for (double level : spec.threshold_levels) out << ",s_covered_" << pct(level);
    out << '\n';
    for (const auto& rec : records) {
        out << rec.length << ',' << rec.rep << ',' << rec.seed << ',' << (rec.ok ? 1 : 0) << ','
            << rec.error << ',' << format_double(rec.estimation_error) << ','
            << format_double(rec.r_hat) << ',' << format_double(rec.s_hat) << ','
            << format_double(rec.scaled_r_error) << ',' << format_double(rec.scaled_s_error) << ','
            << format_double(rec.coef_coverage);
        for (std::size_t k = 0; k < spec.threshold_levels.size(); ++k)
            out << ',' << (k < rec.r_covered.size() ? std::to_string(int(rec.r_covered[k])) : "");
        for (std::size_t k = 0; k < spec.threshold_levels.size(); ++k)
            out << ',' << (k < rec.s_covered.size() ? std::to_string(int(rec.s_covered[k])) : "");
        out << '\n';
    }
}

void write_replicate_summary(std::ostream& out, const ReplicateSpec& spec,
                             const std::vector<LengthSummary>& summary) {
    out << "length,completed,failed,log_error_min,log_error_q1,log_error_median,log_error_q3,"
           "log_error_max,median_error,coef_ecp";
    for (double level : spec.threshold_levels) out << ",r_ecp_" << pct(level);
    for (double level : spec.threshold_levels) out << ",s_ecp_" << pct(level);
    out << '\n';
    for (const auto& s : summary) {
        out << s.length << ',' << s.completed << ',' << s.failed << ','
            << format_double(s.log_error_min) << ',' << format_double(s.log_error_q1) << ','
            << format_double(s.log_error_median) << ',' << format_double(s.log_error_q3) << ','
            << format_double(s.log_error_max) << ',' << format_double(s.median_error) << ','
            << (spec.coef_inference ? format_double(s.coef_ecp) : "");
        for (std::size_t k = 0; k < spec.threshold_levels.size(); ++k)
            out << ',' << (k < s.r_ecp.size() ? format_double(s.r_ecp[k]) : "");
        for (std::size_t k = 0; k < spec.threshold_levels.size(); ++k)
            out << ',' << (k < s.s_ecp.size() ? format_double(s.s_ecp[k]) : "");
        out << '\n';
    }
}

void write_replicate_histograms(std::ostream& out, const std::vector<ReplicateRecord>& records,
                                const std::vector<std::size_t>& lengths, int bins) {
    out << "quantity,length,bin_lower,bin_upper,density\n";
    auto emit = [&](const char* name, std::size_t length, std::vector<double> values) {
        if (values.empty()) return;
        const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        double lo = *lo_it, hi = *hi_it;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
        const double width = (hi - lo) / bins;
        std::vector<int> counts(static_cast<std::size_t>(bins), 0);
        for (double v : values) {
            const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
            ++counts[static_cast<std::size_t>(b)];
        }
        for (int b = 0; b < bins; ++b)
            out << name << ',' << length << ',' << format_double(lo + b * width) << ','
                << format_double(lo + (b + 1) * width) << ','
                << format_double(counts[static_cast<std::size_t>(b)] / (values.size() * width))
                << '\n';
    };
    for (std::size_t length : lengths) {
        std::vector<double> a11, r, s;
        for (const auto& rec : records) {
            if (rec.length != length || !rec.ok) continue;
            if (rec.beta_error.size() > 0) a11.push_back(rec.beta_error(0));
            r.push_back(rec.scaled_r_error);
            s.push_back(rec.scaled_s_error);
        }
        emit("sqrtT_a1_11", length, std::move(a11));
        emit("T_r", length, std::move(r));
        emit("T_s", length, std::move(s));
    }
}

}  // namespace martkit::cli
