#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "martkit/baselines.hpp"
#include "martkit/error.hpp"
#include "martkit/estimate.hpp"
#include "martkit/forecast.hpp"
#include "martkit/inference.hpp"
#include "martkit/io.hpp"
#include "martkit/replicate.hpp"
#include "martkit/simulate.hpp"
#include "report.hpp"
#include "run_config.hpp"

namespace martkit::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return kUsageError;
        case ErrorKind::Parse:
        case ErrorKind::InsufficientData: return kDataError;
        default: return kNumericalFailure;
    }
}

int report_error(const std::string& kind, int code, const std::string& message) {
    std::cerr << json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump() << '\n';
    return code;
}

void configure_logging() {
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("MARTKIT_LOG")) {
        level = spdlog::level::from_str(env);
        // from_str maps unknown names to off
        if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::warn;
    }
    spdlog::set_level(level);
}

class OutputDir {
public:
    explicit OutputDir(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        require(!ec, ErrorKind::InvalidArgument,
                "cannot create output directory " + dir + ": " + ec.message());
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        const fs::path path = dir_ / name;
        std::ofstream out(path);
        require(out.good(), ErrorKind::InvalidArgument, "cannot write " + path.string());
        body(out);
        out.flush();
        require(out.good(), ErrorKind::InvalidArgument, "failed writing " + path.string());
        spdlog::info("wrote {}", path.string());
    }

    void write_json(const std::string& name, const json& doc) const {
        write(name, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    }

private:
    fs::path dir_;
};

MatrixSeries load_data(const RunConfig& cfg) {
    require(cfg.matrix_path.has_value(), ErrorKind::InvalidArgument,
            "no input data: pass --data or set data.matrix in the config");
    MatrixSeries series = ingest(*cfg.matrix_path, cfg.thresholds_path);
    spdlog::info("loaded {} observations of {}x{} matrices", series.length(), series.rows(),
                 series.cols());
    return series;
}

ModelKind resolved_kind(ModelKind kind, Eigen::Index m, Eigen::Index n) {
    if (kind.tag == ModelTag::Rrvar) {
        const int full = static_cast<int>(m * n);
        if (kind.rank_k <= 0) kind.rank_k = 2;
        kind.rank_k = std::min(kind.rank_k, full);
    }
    return kind;
}

// Flag values; applied on top of the config only when given.
struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out_dir;

    std::string setting, distribution, model, axis, what;
    std::vector<long> dims;
    std::vector<std::size_t> lengths;
    std::size_t burn_in = 0;
    double df = 0.0;
    std::string data, thresholds;
    int rank = 0, max_candidates = 0, reps = 0, n_sims = 0;
    double level = 0.0, threshold_level = 0.0, trim = 0.0;
    bool diagnostics = false;
    std::vector<std::string> models;
    int train_window = 0, test_start = 0, test_end = 0, refit_every = 0;
};

[[noreturn]] void usage(const std::string& message) { fail(ErrorKind::InvalidArgument, message); }

template <class T, class Parse>
T parse_enum(const std::string& flag, const std::string& value, Parse parse) {
    const auto v = parse(value);
    if (!v) usage(flag + ": unrecognized value '" + value + "'");
    return *v;
}

void apply_flags(const CLI::App& app, const CLI::App& sub, const Flags& f, RunConfig& cfg) {
    auto given = [&](const char* name) {
        const CLI::Option* opt = sub.get_option_no_throw(name);
        if (opt == nullptr) opt = app.get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("--seed")) cfg.seed = f.seed;
    if (given("--threads")) cfg.threads = f.threads;
    if (given("--out-dir")) cfg.out_dir = f.out_dir;
    if (given("--setting"))
        cfg.setting = parse_enum<Setting>("--setting", f.setting, [](const std::string& s) {
            return s == "I" ? std::optional(Setting::I)
                            : s == "II" ? std::optional(Setting::II) : std::nullopt;
        });
    if (given("--distribution"))
        cfg.distribution = parse_enum<NoiseDistribution>(
            "--distribution", f.distribution, [](const std::string& s) {
                return s == "gaussian"    ? std::optional(NoiseDistribution::Gaussian)
                       : s == "student_t" ? std::optional(NoiseDistribution::StudentT)
                                          : std::nullopt;
            });
    if (given("--df")) cfg.student_df = f.df;
    if (given("--dims")) {
        cfg.m = f.dims.at(0);
        cfg.n = f.dims.at(1);
    }
    if (given("--T")) {
        if (sub.get_name() == "replicate")
            cfg.lengths = f.lengths;
        else
            cfg.length = f.lengths.at(0);
    }
    if (given("--burn-in")) cfg.burn_in = f.burn_in;
    if (given("--data")) cfg.matrix_path = f.data;
    if (given("--thresholds")) cfg.thresholds_path = f.thresholds;
    if (given("--model"))
        cfg.model.tag = parse_enum<ModelTag>("--model", f.model,
                                             [](const std::string& s) { return parse_model_tag(s); });
    if (given("--axis"))
        cfg.model.threshold_axis = parse_enum<ThresholdAxis>(
            "--axis", f.axis, [](const std::string& s) { return parse_threshold_axis(s); });
    if (given("--rank")) cfg.model.rank_k = f.rank;
    if (given("--max-candidates")) cfg.grid.max_candidates_per_axis = f.max_candidates;
    if (given("--trim")) cfg.grid.trim_fraction = f.trim;
    if (given("--level")) cfg.level = f.level;
    if (given("--threshold-level")) cfg.threshold_level = f.threshold_level;
    if (given("--n-sims")) cfg.n_sims = f.n_sims;
    if (given("--reps")) cfg.reps = f.reps;
    if (given("--what")) cfg.what = parse_enum<ReplicateWhat>("--what", f.what, parse_what);
    if (given("--models")) {
        cfg.models.clear();
        for (const auto& name : f.models)
            cfg.models.push_back(parse_enum<ModelTag>(
                "--models", name, [](const std::string& s) { return parse_model_tag(s); }));
    }
    const bool rolling_flag = given("--train-window") || given("--test-start") ||
                              given("--test-end") || given("--refit-every");
    if (rolling_flag) {
        RollingSpec spec = cfg.rolling.value_or(RollingSpec{0, 0, 0, 0});
        if (given("--train-window")) spec.train_window = f.train_window;
        if (given("--test-start")) spec.test_start = f.test_start;
        if (given("--test-end")) spec.test_end = f.test_end;
        if (given("--refit-every")) spec.refit_every = f.refit_every;
        cfg.rolling = spec;
    }
    require(cfg.threads >= 1, ErrorKind::InvalidArgument, "--threads must be >= 1");
}

// ---- subcommands ----

int cmd_simulate(const RunConfig& cfg) {
    DgpSpec spec;
    spec.theta = design_dgp(cfg.m, cfg.n);
    spec.noise = setting_noise(cfg.setting, cfg.m, cfg.n, cfg.seed);
    spec.noise.distribution = cfg.distribution;
    spec.noise.student_df = cfg.student_df;
    spec.length = cfg.length;
    spec.burn_in = cfg.burn_in;
    const MatrixSeries series = simulate_2mart(spec);
    const OutputDir out(cfg.out_dir);
    out.write("series.csv", [&](std::ostream& os) { write_series_csv(os, series); });
    out.write("thresholds.csv", [&](std::ostream& os) { write_thresholds_csv(os, series); });
    return kSuccess;
}

int cmd_fit(const RunConfig& cfg, bool diagnostics) {
    const MatrixSeries series = load_data(cfg);
    json doc;
    if (cfg.model.tag == ModelTag::TwoMart) {
        const FitResult fit = grid_search_fit(series, cfg.grid, cfg.als, cfg.threads);
        doc = fit_json(series, fit, diagnostics);
    } else {
        const ModelKind kind = resolved_kind(cfg.model, series.rows(), series.cols());
        const BaselineFit fit = fit_baseline(series, kind, cfg.grid, cfg.als, cfg.threads);
        doc = baseline_json(series, fit, diagnostics);
    }
    OutputDir(cfg.out_dir).write_json("fit.json", doc);
    return kSuccess;
}

int cmd_infer(const RunConfig& cfg) {
    require(cfg.model.tag == ModelTag::TwoMart, ErrorKind::InvalidArgument,
            "infer supports only the 2mart model");
    const MatrixSeries series = load_data(cfg);
    const FitResult fit = grid_search_fit(series, cfg.grid, cfg.als, cfg.threads);
    const CoefInference coef = asymptotic_cov_beta(series, fit, cfg.level);
    const ThresholdInference th = threshold_ci(series, fit, cfg.threshold_level, cfg.n_sims,
                                               cfg.bandwidths, cfg.seed, cfg.threads);
    json doc = {{"fit", fit_json(series, fit, false)},
                {"coefficients", coef_inference_json(coef, fit.theta_hat.coefs)},
                {"thresholds", threshold_inference_json(th, fit.theta_hat.tau)}};
    OutputDir(cfg.out_dir).write_json("inference.json", doc);
    return kSuccess;
}

int cmd_benchmark(const RunConfig& cfg) {
    const MatrixSeries series = load_data(cfg);
    const RollingSpec spec = resolve_rolling(cfg.rolling, series.length());
    spec.validate();
    std::vector<BenchmarkRow> rows;
    for (ModelTag tag : cfg.models) {
        ModelKind kind = cfg.model;
        kind.tag = tag;
        kind = resolved_kind(kind, series.rows(), series.cols());
        spdlog::info("benchmark: {} over {} origins", to_string(tag), spec.origins());
        BenchmarkRow row;
        row.kind = kind;
        row.param_count = param_count(tag, series.rows(), series.cols(), kind.rank_k);
        row.result = rolling_mspe(series, kind, spec, cfg.grid, cfg.als, cfg.threads);
        rows.push_back(std::move(row));
    }
    const OutputDir out(cfg.out_dir);
    out.write("mspe_table.csv", [&](std::ostream& os) { write_benchmark_table(os, rows); });
    out.write_json("mspe.json", benchmark_json(rows, spec));
    return kSuccess;
}

int cmd_replicate(const RunConfig& cfg) {
    ReplicateSpec spec;
    spec.setting = cfg.setting;
    spec.m = cfg.m;
    spec.n = cfg.n;
    spec.lengths = cfg.lengths;
    spec.reps = cfg.reps;
    spec.root_seed = cfg.seed;
    spec.grid = cfg.grid;
    spec.als = cfg.als;
    spec.coef_level = cfg.level;
    spec.n_sims = cfg.n_sims;
    spec.coef_inference = cfg.what == ReplicateWhat::EcpCoef || cfg.what == ReplicateWhat::All;
    spec.threshold_inference =
        cfg.what == ReplicateWhat::EcpThreshold || cfg.what == ReplicateWhat::All;
    auto& levels = spec.threshold_levels;
    if (std::find(levels.begin(), levels.end(), cfg.threshold_level) == levels.end()) {
        levels.push_back(cfg.threshold_level);
        std::sort(levels.begin(), levels.end());
    }
    spec.validate();

    const auto records = run_replicates(spec, cfg.threads);
    const auto summary = summarize(spec, records);

    const OutputDir out(cfg.out_dir);
    out.write("replicates.csv", [&](std::ostream& os) { write_replicate_records(os, spec, records); });
    out.write("summary.csv", [&](std::ostream& os) { write_replicate_summary(os, spec, summary); });
    out.write("histograms.csv",
              [&](std::ostream& os) { write_replicate_histograms(os, records, spec.lengths); });
    out.write("independence.csv", [&](std::ostream& os) {
        os << "length,pairs,distance_correlation,p_value,permutations\n";
        for (std::size_t l = 0; l < spec.lengths.size(); ++l) {
            std::vector<std::pair<double, double>> pairs;
            for (const auto& rec : records)
                if (rec.ok && rec.length == spec.lengths[l])
                    pairs.emplace_back(rec.scaled_r_error, rec.scaled_s_error);
            if (pairs.size() < 50) continue;  // below the diagnostic's minimum
            const auto res = independence_diagnostic(pairs, 999, spec.seed_of(l, 0));
            os << spec.lengths[l] << ',' << pairs.size() << ',' << format_double(res.statistic)
               << ',' << format_double(res.p_value) << ',' << res.n_permutations << '\n';
        }
    });
    return kSuccess;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    configure_logging();

    CLI::App app{"Two-way threshold matrix autoregression: simulate, fit, infer, benchmark, replicate",
                 "martkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "JSON config applied before command-line flags");
    app.add_option("--seed", f.seed, "root random seed");
    app.add_option("--threads", f.threads, "worker thread cap");
    app.add_option("--out-dir", f.out_dir, "directory for output files");

    auto data_flags = [&](CLI::App* sub) {
        sub->add_option("--data", f.data, "matrix CSV with header t,row,col,value");
        sub->add_option("--thresholds", f.thresholds,
                        "threshold CSV with header t,z,w (endogenous z, w when absent)");
    };
    auto grid_flags = [&](CLI::App* sub) {
        sub->add_option("--max-candidates", f.max_candidates, "coarse grid candidates per axis");
        sub->add_option("--trim", f.trim, "trimmed fraction at each end of the threshold range");
    };
    auto sim_flags = [&](CLI::App* sub) {
        sub->add_option("--setting", f.setting, "noise design: I or II");
        sub->add_option("--dims", f.dims, "matrix dimensions m n")->expected(2);
    };

    CLI::App* simulate = app.add_subcommand("simulate", "simulate the 2-MART design; writes CSV");
    sim_flags(simulate);
    simulate->add_option("--T", f.lengths, "series length")->expected(1);
    simulate->add_option("--burn-in", f.burn_in, "discarded initial steps");
    simulate->add_option("--distribution", f.distribution, "gaussian or student_t");
    simulate->add_option("--df", f.df, "student_t degrees of freedom");

    CLI::App* fit = app.add_subcommand("fit", "fit a model; writes fit.json");
    data_flags(fit);
    grid_flags(fit);
    fit->add_option("--model", f.model, "2mart, ktmar, smart, tmar, tmar3, mar, var, rrvar");
    fit->add_option("--axis", f.axis, "threshold variable of smart/tmar/tmar3: z, w or auto");
    fit->add_option("--rank", f.rank, "rrvar rank");
    fit->add_flag("--diagnostics", f.diagnostics, "include the profile-loss grid");

    CLI::App* infer = app.add_subcommand("infer", "2-MART intervals; writes inference.json");
    data_flags(infer);
    grid_flags(infer);
    infer->add_option("--level", f.level, "coefficient interval level");
    infer->add_option("--threshold-level", f.threshold_level, "threshold interval level");
    infer->add_option("--n-sims", f.n_sims, "argmin simulations per threshold");

    CLI::App* benchmark =
        app.add_subcommand("benchmark", "rolling one-step MSPE; writes mspe_table.csv, mspe.json");
    data_flags(benchmark);
    grid_flags(benchmark);
    benchmark->add_option("--models", f.models, "models to compare");
    benchmark->add_option("--axis", f.axis, "threshold variable of smart/tmar/tmar3: z, w or auto");
    benchmark->add_option("--rank", f.rank, "rrvar rank (default 2, at most mn)");
    benchmark->add_option("--train-window", f.train_window, "observations per fit");
    benchmark->add_option("--test-start", f.test_start, "first forecast origin (1-based)");
    benchmark->add_option("--test-end", f.test_end, "last forecast origin (1-based)");
    benchmark->add_option("--refit-every", f.refit_every, "origins sharing one fit");

    CLI::App* replicate = app.add_subcommand("replicate", "Monte Carlo study; writes CSV summaries");
    sim_flags(replicate);
    grid_flags(replicate);
    replicate->add_option("--T", f.lengths, "series lengths");
    replicate->add_option("--reps", f.reps, "replicates per length");
    replicate->add_option("--what", f.what, "error, ecp-coef, ecp-threshold or all");
    replicate->add_option("--level", f.level, "coefficient interval level");
    replicate->add_option("--threshold-level", f.threshold_level, "extra threshold interval level");
    replicate->add_option("--n-sims", f.n_sims, "argmin simulations per threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", kUsageError, e.what());
    }

    try {
        const CLI::App* sub = app.get_subcommands().front();
        RunConfig cfg;
        if (!f.config.empty()) load_config_file(f.config, cfg);
        apply_flags(app, *sub, f, cfg);

        const std::string name = sub->get_name();
        spdlog::info("martkit {} (seed {}, threads {})", name, cfg.seed, cfg.threads);
        if (name == "simulate") return cmd_simulate(cfg);
        if (name == "fit") return cmd_fit(cfg, f.diagnostics);
        if (name == "infer") return cmd_infer(cfg);
        if (name == "benchmark") return cmd_benchmark(cfg);
        return cmd_replicate(cfg);
    } catch (const Error& e) {
        const int code = exit_code_of(e.kind());
        return report_error(std::string(to_string(e.kind())), code, e.what());
    } catch (const std::exception& e) {
        return report_error("internal", kNumericalFailure, e.what());
    }
}

}  // namespace martkit::cli
