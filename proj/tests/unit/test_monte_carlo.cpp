#include "support.hpp"

#include "collimcal/error.hpp"
#include "collimcal/monte_carlo.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace collimcal;
using namespace collimcal::testing;

namespace {

std::vector<double> ranks(const std::vector<double> &v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
}

double spearman(const std::vector<double> &a, const std::vector<double> &b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

MonteCarloOptions init_only(SweepKind kind, std::vector<double> values) {
    MonteCarloOptions o;
    o.kind = kind;
    o.values = std::move(values);
    o.solvers = {true, false, false, false};
    return o;
}

std::string csv(const std::vector<TrialStats> &s) {
    std::ostringstream out;
    write_benchmark_csv(out, s, false);
    return out.str();
}

} // namespace

TEST(MonteCarlo, NoiseSweepErrorGrows) {
    SyntheticConfig c = undistorted_config();
    c.trial_count = 50;
    const auto stats = run_monte_carlo(c, init_only(SweepKind::noise, default_sweep_values(SweepKind::noise)));
    std::vector<double> x, y;
    for (const auto &s : stats) {
        x.push_back(s.sweep_value);
        y.push_back(s.method("ours", "init").summary.fx_rel_mean);
    }
    EXPECT_GT(spearman(x, y), 0.95);
}

TEST(MonteCarlo, MoreImagesLowerError) {
    SyntheticConfig c = undistorted_config(0.5);
    c.trial_count = 50;
    const auto stats = run_monte_carlo(c, init_only(SweepKind::images, {3, 30}));
    const ErrorSummary &few = stats[0].method("ours", "init").summary;
    const ErrorSummary &many = stats[1].method("ours", "init").summary;
    EXPECT_LT(many.fx_rel_mean, few.fx_rel_mean);
    EXPECT_LT(many.fy_rel_mean, few.fy_rel_mean);
    EXPECT_LT(many.cxy_mean, few.cxy_mean);
    EXPECT_LT(many.gamma_abs_mean, few.gamma_abs_mean);
    EXPECT_LT(many.tcp_mean, few.tcp_mean);
}

TEST(MonteCarlo, DeterministicAcrossRunsAndThreads) {
    SyntheticConfig c;
    c.trial_count = 6;
    MonteCarloOptions o;
    o.values = {0.5, 1.0};
    o.threads = 1;
    const auto a = run_monte_carlo(c, o);
    o.threads = 3;
    const auto b = run_monte_carlo(c, o);
    EXPECT_EQ(csv(a), csv(b));
    for (std::size_t p = 0; p < a.size(); ++p)
        for (std::size_t m = 0; m < a[p].methods.size(); ++m)
            for (std::size_t t = 0; t < a[p].methods[m].trials.size(); ++t)
                EXPECT_EQ(a[p].methods[m].trials[t].estimate.intrinsics.fx,
                          b[p].methods[m].trials[t].estimate.intrinsics.fx);
}

TEST(MonteCarlo, TrialSeedsIgnoreSweepPoint) {
    EXPECT_EQ(trial_seed(5, 3), trial_seed(5, 3));
    EXPECT_NE(trial_seed(5, 3), trial_seed(5, 4));
    EXPECT_NE(trial_seed(5, 3), trial_seed(6, 3));
}

TEST(MonteCarlo, SweepApplication) {
    const SyntheticConfig c;
    EXPECT_EQ(apply_sweep(c, SweepKind::noise, 2.0).pixel_noise_sigma, 2.0);
    EXPECT_EQ(apply_sweep(c, SweepKind::images, 7).image_count, 7);
    EXPECT_EQ(apply_sweep(c, SweepKind::spherical, 10).spherical_noise_sigma, 10.0);
    EXPECT_EQ(parse_sweep_kind("images"), SweepKind::images);
    EXPECT_THROW(parse_sweep_kind("bogus"), CalibrationError);
}

TEST(MonteCarlo, CsvLayout) {
    SyntheticConfig c;
    c.trial_count = 2;
    MonteCarloOptions o;
    o.values = {0.5};
    const std::string text = csv(run_monte_carlo(c, o));
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "sweep_value,solver,stage,fx_err_rel_mean,fx_err_rel_std,cxy_err_px_mean,cxy_err_px_std,"
                    "d1_err_mean,d2_err_mean,tcp_err_mm_mean,fail_count,ms_per_trial");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 11);
        EXPECT_EQ(line.substr(line.size() - 3), ",NA");
    }
    EXPECT_EQ(rows, 4);
}

TEST(MonteCarlo, SummaryStatistics) {
    SyntheticConfig truth;
    truth.distortion = {};
    std::vector<TrialOutcome> trials(3);
    for (int i = 0; i < 3; ++i) {
        trials[i].ok = true;
        trials[i].estimate.intrinsics = truth.intrinsics;
        trials[i].estimate.intrinsics.fx *= 1.0 + 0.01 * (i + 1);
        trials[i].estimate.t_cp = truth.t_cp();
    }
    trials.push_back(TrialOutcome{});
    const ErrorSummary s = summarize(trials, truth);
    EXPECT_EQ(s.fail_count, 1);
    EXPECT_NEAR(s.fx_rel_mean, 2.0, 1e-10);
    EXPECT_NEAR(s.fx_rel_std, 1.0, 1e-10);
    EXPECT_NEAR(s.tcp_mean, 0.0, 1e-12);
}
