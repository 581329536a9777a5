#pragma once

#include "collimcal/camera.hpp"
#include "collimcal/lm.hpp"
#include "collimcal/synth.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <string>
#include <vector>

namespace collimcal {

enum class SweepKind { noise, images, spherical };

SweepKind parse_sweep_kind(const std::string &name);
std::string to_string(SweepKind kind);

/// noise: 0..3 px step 0.5; images: 3..30; spherical: 0..30 mm step 5.
std::vector<double> default_sweep_values(SweepKind kind);

struct SolverSelection {
    bool ours = true;
    bool ours_refined = true;
    bool zhang = true;
    bool zhang_refined = true;
};

struct ParameterEstimate {
    CameraIntrinsics intrinsics;
    Distortion distortion;
    Eigen::Vector3d t_cp = Eigen::Vector3d::Zero(); // Zhang: mean of per-image camera centers
};

struct TrialOutcome {
    bool ok = false;
    std::string error;
    ParameterEstimate estimate;
    double ms = 0.0;
    std::vector<double> cost_trajectory; // refined stages only
};

struct ErrorSummary {
    int trials = 0;
    int fail_count = 0;
    double fx_rel_mean = 0.0; // percent
    double fx_rel_std = 0.0;
    double fy_rel_mean = 0.0;
    double cx_abs_mean = 0.0;
    double cy_abs_mean = 0.0;
    double cxy_mean = 0.0; // Euclidean principal-point error, px
    double cxy_std = 0.0;
    double gamma_abs_mean = 0.0;
    double d1_abs_mean = 0.0;
    double d2_abs_mean = 0.0;
    double x_abs_mean = 0.0;
    double y_abs_mean = 0.0;
    double r_abs_mean = 0.0;
    double tcp_mean = 0.0; // Euclidean, mm
    double ms_mean = 0.0;
};

struct MethodStats {
    std::string solver; // "ours" | "zhang"
    std::string stage;  // "init" | "refined"
    std::vector<TrialOutcome> trials;
    ErrorSummary summary;

    bool failed() const { return 2 * summary.fail_count > summary.trials; }
};

/// Errors of one sweep point; trials share scene seeds across sweep points.
struct TrialStats {
    double sweep_value = 0.0;
    SyntheticConfig config; // with the sweep value applied
    std::vector<MethodStats> methods;

    const MethodStats &method(const std::string &solver, const std::string &stage) const;
};

struct MonteCarloOptions {
    SweepKind kind = SweepKind::noise;
    std::vector<double> values;
    SolverSelection solvers;
    RefinementConfig refinement;
    /// 0: COLLIMCAL_THREADS if set, else hardware concurrency.
    unsigned threads = 0;
};

/// Seed of trial k: mix_seed(rng_seed, k), independent of the sweep point.
std::uint64_t trial_seed(std::uint64_t rng_seed, int trial_index);

SyntheticConfig apply_sweep(const SyntheticConfig &base, SweepKind kind, double value);

ErrorSummary summarize(const std::vector<TrialOutcome> &trials, const SyntheticConfig &truth);

std::vector<TrialStats> run_monte_carlo(const SyntheticConfig &config, const MonteCarloOptions &options);

/// Header plus one row per (sweep point, solver, stage). Timing is written as NA unless
/// include_timing is set, so repeated runs are byte-identical.
void write_benchmark_csv(std::ostream &out, const std::vector<TrialStats> &stats, bool include_timing);

unsigned resolve_thread_count(unsigned requested);

} // namespace collimcal
