#include <gtest/gtest.h>

#include "martkit/error.hpp"
#include "run_config.hpp"

using namespace martkit;
using namespace martkit::cli;
using nlohmann::json;

namespace {

std::string rejection(const json& doc) {
    RunConfig cfg;
    try {
        apply_config(doc, cfg);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
        return e.what();
    }
    ADD_FAILURE() << "accepted " << doc.dump();
    return {};
}

}  // namespace

TEST(RunConfig, AppliesEverySection) {
    const json doc = json::parse(R"({
        "model": {"kind": "rrvar", "rank_k": 3, "threshold_axis": "w"},
        "grid": {"trim_fraction": 0.15, "max_candidates_per_axis": 40, "source": "uniform_quantiles",
                 "refine": false, "refine_top_k": 2, "max_sweeps": 1, "extra_r": [0.5], "extra_s": []},
        "als": {"max_iters": 50, "rel_tol": 1e-6, "grad_tol": 1e-4, "init": "identity"},
        "simulate": {"m": 4, "n": 3, "length": 250, "burn_in": 10},
        "noise": {"setting": "II", "distribution": "student_t", "student_df": 7},
        "inference": {"level": 0.9, "threshold_level": 0.95, "n_sims": 300,
                      "bandwidth_z": 0.2, "bandwidth_w": 0.3},
        "rolling": {"train_window": 100, "test_start": 201, "test_end": 250, "refit_every": 5},
        "benchmark": {"models": ["mar", "2-mart"]},
        "replicate": {"lengths": [200, 400], "reps": 7, "what": "ecp-threshold"},
        "data": {"matrix": "x.csv", "thresholds": "t.csv"},
        "seed": 42, "threads": 3, "out_dir": "out"
    })");
    RunConfig cfg;
    apply_config(doc, cfg);
    EXPECT_EQ(cfg.model.tag, ModelTag::Rrvar);
    EXPECT_EQ(cfg.model.rank_k, 3);
    EXPECT_EQ(cfg.model.threshold_axis, ThresholdAxis::UseW);
    EXPECT_EQ(cfg.grid.trim_fraction, 0.15);
    EXPECT_EQ(cfg.grid.max_candidates_per_axis, 40);
    EXPECT_EQ(cfg.grid.source, CandidateSource::UniformQuantiles);
    EXPECT_FALSE(cfg.grid.refine);
    EXPECT_EQ(cfg.grid.extra_r, std::vector<double>{0.5});
    EXPECT_EQ(cfg.als.init, InitKind::Identity);
    EXPECT_EQ(cfg.m, 4);
    EXPECT_EQ(cfg.length, 250u);
    EXPECT_EQ(cfg.setting, Setting::II);
    EXPECT_EQ(cfg.distribution, NoiseDistribution::StudentT);
    EXPECT_EQ(cfg.student_df, 7.0);
    ASSERT_TRUE(cfg.bandwidths.has_value());
    EXPECT_EQ(cfg.bandwidths->w, 0.3);
    ASSERT_TRUE(cfg.rolling.has_value());
    EXPECT_EQ(cfg.rolling->refit_every, 5);
    EXPECT_EQ(cfg.models, (std::vector<ModelTag>{ModelTag::Mar, ModelTag::TwoMart}));
    EXPECT_EQ(cfg.lengths, (std::vector<std::size_t>{200, 400}));
    EXPECT_EQ(cfg.what, ReplicateWhat::EcpThreshold);
    EXPECT_EQ(*cfg.thresholds_path, "t.csv");
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.threads, 3);
    EXPECT_EQ(cfg.out_dir, "out");
}

TEST(RunConfig, UnknownKeysAreRejectedWithTheirPath) {
    EXPECT_NE(rejection({{"sed", 1}}).find("$.sed: unknown key"), std::string::npos);
    EXPECT_NE(rejection({{"grid", {{"max_candidates", 5}}}}).find("grid.max_candidates: unknown key"),
              std::string::npos);
    EXPECT_NE(rejection({{"als", {{"init", "mar"}, {"tol", 1}}}}).find("als.tol"), std::string::npos);
}

TEST(RunConfig, WrongTypesAndValuesAreRejected) {
    EXPECT_NE(rejection({{"seed", "7"}}).find("$.seed: expected an integer"), std::string::npos);
    EXPECT_NE(rejection({{"seed", -1}}).find("non-negative"), std::string::npos);
    EXPECT_NE(rejection({{"grid", {{"refine", 1}}}}).find("expected true or false"),
              std::string::npos);
    EXPECT_NE(rejection({{"model", {{"kind", "arima"}}}}).find("got 'arima'"), std::string::npos);
    EXPECT_NE(rejection({{"noise", {{"setting", "III"}}}}).find("noise.setting"), std::string::npos);
    EXPECT_NE(rejection({{"grid", 3}}).find("expected an object"), std::string::npos);
    EXPECT_NE(rejection({{"inference", {{"bandwidth_z", 0.1}}}}).find("given together"),
              std::string::npos);
    EXPECT_NE(rejection({{"replicate", {{"lengths", {1}}}}}).find("replicate.lengths"),
              std::string::npos);
    EXPECT_NE(rejection({{"benchmark", {{"models", {"mar", "lstm"}}}}}).find("unknown model"),
              std::string::npos);
}

TEST(RunConfig, LaterDocumentsOverrideEarlierOnes) {
    RunConfig cfg;
    apply_config({{"seed", 3}, {"grid", {{"trim_fraction", 0.2}}}}, cfg);
    apply_config({{"grid", {{"max_candidates_per_axis", 12}}}}, cfg);
    EXPECT_EQ(cfg.seed, 3u);
    EXPECT_EQ(cfg.grid.trim_fraction, 0.2);
    EXPECT_EQ(cfg.grid.max_candidates_per_axis, 12);
}

TEST(RunConfig, MissingConfigFileIsAUsageError) {
    RunConfig cfg;
    try {
        load_config_file("/nonexistent/martkit.json", cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(RunConfig, RollingDefaults) {
    const RollingSpec d = default_rolling(1000);
    EXPECT_EQ(d.test_start, 901);
    EXPECT_EQ(d.test_end, 1000);
    EXPECT_EQ(d.train_window, 900);
    EXPECT_EQ(d.refit_every, 1);
    EXPECT_EQ(default_rolling(5).origins(), 1);

    EXPECT_EQ(resolve_rolling(std::nullopt, 1000).test_start, 901);
    const RollingSpec partial = resolve_rolling(RollingSpec{0, 951, 0, 0}, 1000);
    EXPECT_EQ(partial.test_start, 951);
    EXPECT_EQ(partial.test_end, 1000);
    EXPECT_EQ(partial.train_window, 950);
    EXPECT_EQ(partial.refit_every, 1);
    const RollingSpec full = resolve_rolling(RollingSpec{200, 951, 990, 10}, 1000);
    EXPECT_EQ(full.train_window, 200);
    EXPECT_EQ(full.test_end, 990);
    EXPECT_EQ(full.refit_every, 10);
}

TEST(RunConfig, WhatNamesRoundTrip) {
    for (auto w : {ReplicateWhat::Error, ReplicateWhat::EcpCoef, ReplicateWhat::EcpThreshold,
                   ReplicateWhat::All})
        EXPECT_EQ(parse_what(to_string(w)), w);
    EXPECT_FALSE(parse_what("coverage").has_value());
}
