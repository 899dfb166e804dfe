#include <gtest/gtest.h>

#include <cmath>

#include "martkit/error.hpp"
#include "martkit/replicate.hpp"

using namespace martkit;

namespace {

ReplicateSpec small_spec() {
    ReplicateSpec spec;
    spec.lengths = {150, 300};
    spec.reps = 3;
    spec.root_seed = 40;
    spec.grid.max_candidates_per_axis = 12;
    spec.threshold_inference = true;
    spec.n_sims = 50;
    return spec;
}

}  // namespace

TEST(Replicate, SeedsFollowRootPlusIndex) {
    const ReplicateSpec spec = small_spec();
    EXPECT_EQ(spec.seed_of(0, 0), 40u);
    EXPECT_EQ(spec.seed_of(0, 2), 42u);
    EXPECT_EQ(spec.seed_of(1, 0), 43u);
}

TEST(Replicate, RecordsAndSummaryAreConsistent) {
    const ReplicateSpec spec = small_spec();
    const auto records = run_replicates(spec, 1);
    ASSERT_EQ(records.size(), 6u);
    for (const auto& rec : records) {
        ASSERT_TRUE(rec.ok) << rec.error;
        EXPECT_EQ(rec.seed, spec.seed_of(rec.length == 150 ? 0 : 1, rec.rep));
        EXPECT_GT(rec.estimation_error, 0.0);
        EXPECT_GE(rec.coef_coverage, 0.0);
        EXPECT_LE(rec.coef_coverage, 1.0);
        EXPECT_EQ(rec.r_covered.size(), 3u);
        // Wider intervals cover whenever narrower ones do.
        for (std::size_t k = 1; k < rec.r_covered.size(); ++k) {
            EXPECT_GE(rec.r_covered[k], rec.r_covered[k - 1]);
            EXPECT_GE(rec.s_covered[k], rec.s_covered[k - 1]);
        }
        EXPECT_NEAR(rec.scaled_r_error, static_cast<double>(rec.length) * (rec.r_hat - 0.02), 1e-9);
    }
    const auto summary = summarize(spec, records);
    ASSERT_EQ(summary.size(), 2u);
    for (const auto& s : summary) {
        EXPECT_EQ(s.completed, 3);
        EXPECT_LE(s.log_error_min, s.log_error_q1);
        EXPECT_LE(s.log_error_q1, s.log_error_median);
        EXPECT_LE(s.log_error_median, s.log_error_q3);
        EXPECT_LE(s.log_error_q3, s.log_error_max);
        EXPECT_NEAR(std::log(s.median_error), s.log_error_median, 1e-12);
    }
}

TEST(Replicate, ThreadCountDoesNotChangeResults) {
    ReplicateSpec spec = small_spec();
    spec.threshold_inference = false;
    const auto one = run_replicates(spec, 1);
    const auto three = run_replicates(spec, 3);
    ASSERT_EQ(one.size(), three.size());
    for (std::size_t k = 0; k < one.size(); ++k) {
        EXPECT_EQ(one[k].estimation_error, three[k].estimation_error);
        EXPECT_EQ(one[k].coef_coverage, three[k].coef_coverage);
        EXPECT_EQ(one[k].beta_error, three[k].beta_error);
    }
}

TEST(Replicate, ValidatesSpec) {
    ReplicateSpec spec = small_spec();
    spec.reps = 0;
    EXPECT_THROW(run_replicates(spec), Error);
    spec = small_spec();
    spec.threshold_levels = {1.2};
    EXPECT_THROW(run_replicates(spec), Error);
}
