#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "martkit/baselines.hpp"
#include "martkit/estimate.hpp"
#include "martkit/forecast.hpp"
#include "martkit/inference.hpp"
#include "martkit/simulate.hpp"

namespace martkit::cli {

enum class ReplicateWhat { Error, EcpCoef, EcpThreshold, All };

/// Every tunable of every subcommand. Loaded from a JSON config, then
/// overridden by command-line flags.
struct RunConfig {
    ModelKind model{ModelTag::TwoMart, 0, ThresholdAxis::Auto};
    GridSpec grid;
    AlsOptions als;

    Setting setting = Setting::I;
    NoiseDistribution distribution = NoiseDistribution::Gaussian;
    double student_df = 5.0;
    Eigen::Index m = 3;
    Eigen::Index n = 2;
    std::size_t length = 1000;
    std::size_t burn_in = 200;

    double level = 0.95;
    double threshold_level = 0.90;
    int n_sims = 1000;
    std::optional<Bandwidths> bandwidths;

    std::optional<RollingSpec> rolling;
    std::vector<ModelTag> models{ModelTag::TwoMart, ModelTag::Ktmar, ModelTag::Smart,
                                 ModelTag::Tmar,    ModelTag::Tmar3, ModelTag::Mar,
                                 ModelTag::Var,     ModelTag::Rrvar};

    std::vector<std::size_t> lengths{200, 400, 1000, 4000};
    int reps = 100;
    ReplicateWhat what = ReplicateWhat::All;

    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";
    std::optional<std::string> matrix_path;
    std::optional<std::string> thresholds_path;
};

/// Applies a config document on top of `cfg`. Unknown keys and wrongly
/// typed values raise ErrorKind::InvalidArgument naming the JSON path.
void apply_config(const nlohmann::json& doc, RunConfig& cfg);

/// Reads and applies a config file.
void load_config_file(const std::string& path, RunConfig& cfg);

std::optional<ReplicateWhat> parse_what(const std::string& name);
std::string to_string(ReplicateWhat what);

/// Default rolling protocol: the last tenth of the series (at least one
/// origin) is forecast, with every earlier observation in the window.
RollingSpec default_rolling(std::size_t length);

/// Fills the zero fields of a partially given protocol. test_end defaults to
/// the last observation, test_start to the default protocol's, and
/// train_window to every observation before test_start.
RollingSpec resolve_rolling(const std::optional<RollingSpec>& given, std::size_t length);

}  // namespace martkit::cli
