// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include "support.hpp"

#include "collimcal/bundle.hpp"
#include "collimcal/degeneracy.hpp"
#include "collimcal/monte_carlo.hpp"
#include "collimcal/multi_solver.hpp"
#include "collimcal/single_image.hpp"
#include "collimcal/synth.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace collimcal;
using namespace collimcal::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Cost trajectories of every refinement run in this process.
struct TrajectoryLog {
    long runs = 0;
    long violations = 0;
    void add(const std::vector<double> &costs) {
        ++runs;
        for (std::size_t i = 1; i < costs.size(); ++i)
            if (costs[i] > costs[i - 1]) {
                ++violations;
                return;
            }
    }
} g_trajectories;

void log_trajectories(const std::vector<TrialStats> &stats) {
    for (const auto &p : stats)
        for (const auto &m : p.methods)
            if (m.stage == "refined")
                for (const auto &t : m.trials)
                    if (t.ok) g_trajectories.add(t.cost_trajectory);
}

double max_param_rel_err(const CameraIntrinsics &K, const CameraIntrinsics &T) {
    double e = 0.0;
    const auto k = K.to_vector(), t = T.to_vector();
    for (int i = 0; i < 5; ++i) e = std::max(e, std::abs(k[i] - t[i]) / std::abs(t[i]));
    return e;
}

MonteCarloOptions options(SweepKind kind, std::vector<double> values, SolverSelection solvers) {
    MonteCarloOptions o;
    o.kind = kind;
    o.values = std::move(values);
    o.solvers = solvers;
    return o;
}

/// Mean fx error (percent) of two methods over trials where both succeeded.
std::pair<double, double> paired_fx(const MethodStats &a, const MethodStats &b, const SyntheticConfig &truth) {
    double sa = 0.0, sb = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < a.trials.size(); ++t) {
        if (!a.trials[t].ok || !b.trials[t].ok) continue;
        sa += rel_err(a.trials[t].estimate.intrinsics.fx, truth.intrinsics.fx);
        sb += rel_err(b.trials[t].estimate.intrinsics.fx, truth.intrinsics.fx);
        ++n;
    }
    return {100.0 * sa / n, 100.0 * sb / n};
}

Verdict zero_noise_exactness() {
    double worst_k = 0.0, worst_t = 0.0, worst_s = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SyntheticConfig c = undistorted_config(0.0, 15);
        const SyntheticScene sc = generate_scene(c, seed);
        auto t0 = Clock::now();
        const SphericalSolution cf = solve_closed_form(sc.observations);
        const auto candidates = solve_minimal(sc.observations.subset({0, 1}));
        worst_s = std::max(worst_s, seconds_since(t0));
        if (candidates.empty()) return {false, fmt("seed %d: minimal solver returned no candidate", (int)seed)};
        const SphericalSolution &mn = candidates.front().solution;
        worst_k = std::max({worst_k, max_param_rel_err(cf.intrinsics, c.intrinsics),
                            max_param_rel_err(mn.intrinsics, c.intrinsics)});
        worst_t = std::max({worst_t, (cf.extrinsics.t_cp() - c.t_cp()).norm(), (mn.extrinsics.t_cp() - c.t_cp()).norm()});
    }
    return {worst_k < 1e-6 && worst_t < 1e-4 && worst_s < 1.0,
            fmt("20 scenes: max intrinsic rel err %.2e (<1e-6), max t_cp err %.2e mm (<1e-4), slowest %.3f s (<1)",
                worst_k, worst_t, worst_s)};
}

Verdict init_noise_claim() {
    SyntheticConfig c = undistorted_config(1.0, 15);
    c.trial_count = 200;
    const auto t0 = Clock::now();
    const auto stats = run_monte_carlo(c, options(SweepKind::noise, {1.0}, {true, false, false, false}));
    const double secs = seconds_since(t0);
    const ErrorSummary &s = stats[0].method("ours", "init").summary;
    const bool pass = s.fx_rel_mean < 0.75 && s.cxy_mean < 3.0 && secs < 120.0 && !stats[0].method("ours", "init").failed();
    return {pass, fmt("1 px, 15 images, 200 trials: fx %.3f%% (<0.75, claim 0.5), c %.3f px (<3.0, claim 2.0), "
                      "%d failures, %.1f s",
                      s.fx_rel_mean, s.cxy_mean, s.fail_count, secs)};
}

Verdict ten_image_claim() {
    SyntheticConfig c = undistorted_config(0.5, 10);
    c.trial_count = 200;
    const auto t0 = Clock::now();
    const auto stats = run_monte_carlo(c, options(SweepKind::noise, {0.5}, {true, false, false, false}));
    const double secs = seconds_since(t0);
    const ErrorSummary &s = stats[0].method("ours", "init").summary;
    const bool pass = s.fx_rel_mean < 0.3 && s.cxy_mean < 1.5 && secs < 120.0;
    return {pass, fmt("0.5 px, 10 images, 200 trials: fx %.3f%% (<0.3), c %.3f px (<1.5), %d failures, %.1f s",
                      s.fx_rel_mean, s.cxy_mean, s.fail_count, secs)};
}

Verdict baseline_ordering() {
    SyntheticConfig c = undistorted_config(1.0, 15);
    c.trial_count = 200;
    const std::vector<double> points{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    const auto t0 = Clock::now();
    const auto stats = run_monte_carlo(c, options(SweepKind::noise, points, {true, true, true, true}));
    log_trajectories(stats);
    int ok_points = 0;
    bool at_one_px = false;
    std::ostringstream detail;
    for (const auto &p : stats) {
        const auto [oi, zi] = paired_fx(p.method("ours", "init"), p.method("zhang", "init"), p.config);
        const auto [orf, zrf] = paired_fx(p.method("ours", "refined"), p.method("zhang", "refined"), p.config);
        const bool ok = oi <= zi && orf <= zrf;
        ok_points += ok;
        if (p.sweep_value == 1.0) at_one_px = ok;
        detail << fmt(" %.1fpx[%.2f/%.2f, %.2f/%.2f]", p.sweep_value, oi, zi, orf, zrf);
    }
    const double frac = static_cast<double>(ok_points) / stats.size();
    return {at_one_px && frac >= 0.9,
            fmt("ours<=zhang (init and BA) at 1 px: %s, at %d/%zu sweep points (>=90%%), %.0f s; fx%% "
                "[ours/zhang init, ours/zhang BA]:",
                at_one_px ? "yes" : "no", ok_points, stats.size(), seconds_since(t0)) +
                detail.str()};
}

Verdict spherical_sensitivity() {
    SyntheticConfig c = undistorted_config(0.5, 15);
    c.trial_count = 100;
    const auto t0 = Clock::now();
    const auto stats =
        run_monte_carlo(c, options(SweepKind::spherical, default_sweep_values(SweepKind::spherical), {true, false, true, false}));
    const double secs = seconds_since(t0);
    std::vector<double> ours, zhang;
    std::ostringstream detail;
    for (const auto &p : stats) {
        ours.push_back(p.method("ours", "init").summary.fx_rel_mean);
        zhang.push_back(p.method("zhang", "init").summary.fx_rel_mean);
        detail << fmt(" %gmm[%.3f/%.3f]", p.sweep_value, ours.back(), zhang.back());
    }
    const double zmin = *std::min_element(zhang.begin(), zhang.end());
    const double zmax = *std::max_element(zhang.begin(), zhang.end());
    const double zmean = std::accumulate(zhang.begin(), zhang.end(), 0.0) / zhang.size();
    const double variation = (zmax - zmin) / zmean;
    bool monotone = true;
    for (std::size_t i = 1; i < ours.size(); ++i) monotone = monotone && ours[i] > ours[i - 1];
    bool ours_better = true;
    for (std::size_t i = 0; i < stats.size(); ++i)
        if (stats[i].sweep_value <= 15.0) ours_better = ours_better && ours[i] <= zhang[i];
    return {variation < 0.05 && monotone && ours_better && secs < 300.0,
            fmt("zhang variation %.2f%% (<5%%), ours monotone: %s, ours<=zhang up to 15 mm: %s, %.0f s; fx%% "
                "[ours/zhang]:",
                100.0 * variation, monotone ? "yes" : "no", ours_better ? "yes" : "no", secs) +
                detail.str()};
}

Verdict degeneracy() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> angle(0.1, 0.6);
    int checked = 0, unchanged = 0, flagged = 0;
    for (int k = 0; k < 100; ++k) {
        SyntheticConfig c = undistorted_config(0.0, 3 + k % 6);
        c.max_angle_deg = 15;
        auto poses = generate_spherical_poses(c, 1000 + k);
        const int before = detect_degeneracy(render_observations(poses, c, 1)).rank;
        const std::size_t member = rng() % poses.size();
        poses.push_back(z_rotated(poses[member], (rng() % 2 ? 1.0 : -1.0) * angle(rng)));
        const DegeneracyReport rep = detect_degeneracy(render_observations(poses, c, 1));
        ++checked;
        unchanged += rep.rank == before;
        for (const auto &pair : rep.z_rotation) flagged += pair.first == member && pair.second == poses.size() - 1;
    }
    // Rotation-only family: each further z rotation keeps the rank.
    SyntheticConfig c = undistorted_config(0.0, 1);
    c.max_angle_deg = 15;
    const SphericalPose base = generate_spherical_poses(c, 77).front();
    std::vector<SphericalPose> fam{base, z_rotated(base, 0.3)};
    const int fam_before = detect_degeneracy(render_observations(fam, c, 1)).rank;
    fam.push_back(z_rotated(base, -0.4));
    const DegeneracyReport fam_rep = detect_degeneracy(render_observations(fam, c, 1));
    const bool fam_ok = fam_rep.rank == fam_before && fam_rep.z_rotation.size() == 3;

    // Collimated pure translation.
    const Rotation R = generate_spherical_poses(c, 5).front().R_pc;
    const ImageObservations a = render_collimated(R, {0, 0, 0}, c);
    const ImageObservations b = render_collimated(R, {35, -20, 60}, c);
    double delta = 0.0;
    for (std::size_t i = 0; i < a.points.size(); ++i)
        delta = std::max(delta, (a.points[i].pixel - b.points[i].pixel).cwiseAbs().maxCoeff());
    const ObservationSet pair(PlanarTarget::grid(c.target.rows, c.target.cols, c.target.square_mm), {a, b});
    const bool trans_flag = detect_degeneracy(pair).pure_translation.size() == 1;

    return {unchanged == checked && flagged == checked && fam_ok && delta < 1e-9 && trans_flag,
            fmt("z-dup appended to %d sets of 3-8 images: rank unchanged %d, flagged %d; rotation family rank "
                "%d->%d flagged %zu pairs; translation max delta %.1e px (<1e-9), flagged: %s",
                checked, unchanged, flagged, fam_before, fam_rep.rank, fam_rep.z_rotation.size(), delta,
                trans_flag ? "yes" : "no")};
}

Verdict spherical_motion() {
    const PlanarTarget target = PlanarTarget::grid(8, 11, 30.0);
    const auto &pts = target.points();
    std::mt19937_64 rng(707);
    double worst_angle = 0.0, worst_det = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const SyntheticConfig c;
        const auto poses = generate_spherical_poses(c, 5000 + s);
        for (int k = 0; k < 5; ++k) {
            const auto &p = pts[rng() % pts.size()];
            const auto &q = pts[rng() % pts.size()];
            const Eigen::Vector3d P(p.x, p.y, 0), Q(q.x, q.y, 0);
            const double ref = angular_distance(P - c.t_cp(), Q - c.t_cp());
            for (const auto &pose : poses)
                worst_angle = std::max(
                    worst_angle, std::abs(angular_distance(pose.R_pc * (P - pose.t_cp), pose.R_pc * (Q - pose.t_cp)) - ref));
        }
        for (const auto &pose : poses)
            worst_det = std::max(worst_det, std::abs(pose.motion_matrix().determinant() - c.radius_mm));
    }
    std::uniform_real_distribution<double> radius(0.1, 2000.0);
    bool unique = true;
    for (int k = 0; k < 5; ++k) {
        const double r = radius(rng);
        int admissible = 0;
        for (const auto &t : orthogonal_triple_roots(r))
            if (t.z() > -2.0 * r + 1e-6 * r) {
                ++admissible;
                unique = unique && t.norm() < 1e-8 * r;
            }
        unique = unique && admissible == 1;
    }
    return {worst_angle < 1e-10 && worst_det < 1e-10 && unique,
            fmt("1000 scenes: max angle drift %.2e rad (<1e-10), max |det M - r| %.2e (<1e-10); orthogonal-triple "
                "search, 5 radii: t = 0 unique admissible root: %s",
                worst_angle, worst_det, unique ? "yes" : "no")};
}

Verdict single_image() {
    const CameraIntrinsics ref_K{1200, 1190, 530, 470, 0};
    const Distortion ref_d{0.05, -0.1};
    const auto t0 = Clock::now();
    double worst_k = 0.0, worst_r = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SyntheticConfig c = undistorted_config(0.0, 1);
        const SingleImageScene sc = generate_single_image_scene(c, ref_K, ref_d, seed);
        const SingleImageResult r = calibrate_single_image(sc.calibration, build_ray_database(sc.reference, ref_K, ref_d));
        g_trajectories.add(r.report.cost_trajectory);
        worst_k = std::max(worst_k, max_param_rel_err(r.intrinsics, c.intrinsics));
        worst_r = std::max(worst_r, rotation_distance(r.rotation, sc.relative_rotation()));
    }
    double worst_f = 0.0, mean_f = 0.0, rms_lo = 1e9, rms_hi = 0.0;
    int failures = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SyntheticConfig c;
        c.pixel_noise_sigma = 0.5;
        c.image_count = 1;
        c.min_visible_points = 88;
        const SingleImageScene sc = generate_single_image_scene(c, ref_K, ref_d, 100 + seed);
        if (sc.calibration.points.size() != 88) ++failures;
        try {
            const SingleImageResult r =
                calibrate_single_image(sc.calibration, build_ray_database(sc.reference, ref_K, ref_d));
            g_trajectories.add(r.report.cost_trajectory);
            const double f = std::max(rel_err(r.intrinsics.fx, c.intrinsics.fx), rel_err(r.intrinsics.fy, c.intrinsics.fy));
            worst_f = std::max(worst_f, f);
            mean_f += f / 50.0;
            rms_lo = std::min(rms_lo, r.report.rms_reprojection);
            rms_hi = std::max(rms_hi, r.report.rms_reprojection);
        } catch (const std::exception &) {
            ++failures;
        }
    }
    const double secs = seconds_since(t0);
    return {worst_k < 1e-6 && worst_r < 1e-8 && worst_f < 0.01 && rms_lo >= 0.3 && rms_hi <= 0.7 && failures == 0 &&
                secs < 30.0,
            fmt("noiseless: K rel err %.2e (<1e-6), R err %.2e rad (<1e-8); d=(0.1,-0.2), 0.5 px, 88 pts, 50 trials: "
                "focal err max %.3f%% mean %.3f%% (<1%%), RMS [%.3f, %.3f] px (in [0.3, 0.7]), %d failures, %.1f s",
                worst_k, worst_r, 100.0 * worst_f, 100.0 * mean_f, rms_lo, rms_hi, failures, secs)};
}

Verdict optimizer_integrity() {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_sph = 0.0, worst_single = 0.0, worst_planar = 0.0;
    for (int k = 0; k < 100; ++k) {
        SyntheticConfig c = undistorted_config(0.5, 3);
        c.distortion = {0.1 + 0.02 * u(rng), -0.2 + 0.04 * u(rng)};
        const SyntheticScene sc = generate_scene(c, 300 + k);
        CameraIntrinsics K = c.intrinsics;
        K.fx *= 1.0 + 0.02 * u(rng);
        K.fy *= 1.0 + 0.02 * u(rng);
        K.cx += 5.0 * u(rng);
        K.cy += 5.0 * u(rng);
        K.gamma += 0.5 * u(rng);
        auto jitter = [&](const Rotation &R) { return R.boxplus(Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.01); };
        if (k % 3 == 0) {
            SphericalState s{K, c.distortion, {}};
            s.extrinsics.x = c.t_cp().x() + 3.0 * u(rng);
            s.extrinsics.y = c.t_cp().y() + 3.0 * u(rng);
            s.extrinsics.r = c.radius_mm * (1.0 + 0.01 * u(rng));
            for (const auto &p : sc.poses) s.extrinsics.rotations.push_back(jitter(p.R_pc));
            const Eigen::VectorXd x = pack_spherical(s);
            const Eigen::MatrixXd J = spherical_jacobian(sc.observations, x);
            const Eigen::MatrixXd F = central_difference(
                [&](const Eigen::VectorXd &p) { return spherical_residuals(sc.observations, p); }, spherical_plus, x,
                J.cols(), 1e-6);
            worst_sph = std::max(worst_sph, max_rel_discrepancy(J, F));
        } else if (k % 3 == 1) {
            std::vector<RayCorrespondence> corr;
            const Rotation R = Rotation::from_axis_angle(Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.3);
            for (const auto &p : sc.observations.images()[0].points)
                corr.emplace_back(back_project(c.intrinsics, c.distortion, p.pixel), p.pixel);
            const Eigen::VectorXd x = pack_single({K, c.distortion, R});
            const Eigen::MatrixXd J = single_jacobian(corr, x);
            const Eigen::MatrixXd F = central_difference(
                [&](const Eigen::VectorXd &p) { return single_residuals(corr, p); }, single_plus, x, J.cols(), 1e-6);
            worst_single = std::max(worst_single, max_rel_discrepancy(J, F));
        } else {
            PlanarState s{K, c.distortion, {}, {}};
            for (const auto &p : sc.poses) {
                s.rotations.push_back(jitter(p.R_pc));
                s.translations.push_back(p.translation() + Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0);
            }
            const Eigen::VectorXd x = pack_planar(s);
            const Eigen::MatrixXd J = planar_jacobian(sc.observations, x);
            const Eigen::MatrixXd F = central_difference(
                [&](const Eigen::VectorXd &p) { return planar_residuals(sc.observations, p); }, planar_plus, x,
                J.cols(), 1e-6);
            worst_planar = std::max(worst_planar, max_rel_discrepancy(J, F));
        }
    }
    const double worst = std::max({worst_sph, worst_single, worst_planar});
    return {worst < 1e-5 && g_trajectories.runs > 0 && g_trajectories.violations == 0,
            fmt("100 random points: max FD discrepancy spherical %.2e, single %.2e, planar %.2e (<1e-5); robust cost "
                "non-increasing in %ld/%ld refinement runs",
                worst_sph, worst_single, worst_planar, g_trajectories.runs - g_trajectories.violations,
                g_trajectories.runs)};
}

Verdict determinism() {
    SyntheticConfig c;
    c.trial_count = 10;
    auto run = [&](unsigned threads) {
        MonteCarloOptions o = options(SweepKind::noise, {0.5, 1.5}, {true, true, true, true});
        o.threads = threads;
        const auto stats = run_monte_carlo(c, o);
        log_trajectories(stats);
        std::ostringstream out;
        write_benchmark_csv(out, stats, false);
        return out.str();
    };
    const std::string a = run(1), b = run(1), d = run(3);
    return {a == b && a == d && !a.empty(),
            fmt("noise sweep, 10 trials, all solvers: repeat identical: %s, 1 vs 3 threads identical: %s (%zu bytes)",
                a == b ? "yes" : "no", a == d ? "yes" : "no", a.size())};
}

} // namespace

int main() {
    const std::vector<std::pair<const char *, std::function<Verdict()>>> criteria{
        {"zero-noise exactness", zero_noise_exactness},
        {"initialization accuracy at 1 px", init_noise_claim},
        {"ten-image accuracy at 0.5 px", ten_image_claim},
        {"ordering against the plane-based baseline", baseline_ordering},
        {"sensitivity to imperfect spherical motion", spherical_sensitivity},
        {"degenerate motions", degeneracy},
        {"spherical-motion properties", spherical_motion},
        {"single-image pipeline", single_image},
        {"optimizer integrity", optimizer_integrity},
        {"benchmark determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s  criterion %zu: %s -- %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
