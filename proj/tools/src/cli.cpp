#include "cli.hpp"

#include "io.hpp"

#include "collimcal/bundle.hpp"
#include "collimcal/degeneracy.hpp"
#include "collimcal/error.hpp"
#include "collimcal/monte_carlo.hpp"
#include "collimcal/multi_solver.hpp"
#include "collimcal/single_image.hpp"
#include "collimcal/synth.hpp"

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#ifndef COLLIMCAL_VERSION
#define COLLIMCAL_VERSION "unknown"
#endif

namespace collimcal::cli {

using nlohmann::json;

namespace {

/// Solver failure that should map to the degeneracy exit code.
class DegenerateInput : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

json vec_json(const Eigen::Ref<const Eigen::VectorXd> &v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json degeneracy_json(const DegeneracyReport &rep) {
    auto pairs = [](const std::vector<DegeneratePair> &ps) {
        json a = json::array();
        for (const auto &p : ps) a.push_back({{"first", p.first}, {"second", p.second}, {"measure", p.measure}});
        return a;
    };
    return {{"flagged", rep.flagged()},
            {"pure_translation", pairs(rep.pure_translation)},
            {"z_rotation", pairs(rep.z_rotation)},
            {"rank", rep.rank},
            {"rank_profile", rep.rank_profile},
            {"singular_values", vec_json(rep.singular_values)}};
}

json residual_json(const ResidualReport &r) {
    return {{"rms_reprojection_px", r.rms_reprojection},
            {"per_image_rms_px", r.per_image_rms},
            {"iterations", r.iterations_used},
            {"converged", r.converged},
            {"termination", r.termination}};
}

/// Residual summary of an unrefined spherical estimate.
ResidualReport spherical_report(const ObservationSet &obs, const SphericalState &state) {
    const Eigen::VectorXd r = spherical_residuals(obs, pack_spherical(state));
    ResidualReport rep;
    rep.rms_reprojection = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
    Eigen::Index offset = 0;
    for (const auto &img : obs.images()) {
        const auto n = static_cast<Eigen::Index>(2 * img.points.size());
        rep.per_image_rms.push_back(std::sqrt(r.segment(offset, n).squaredNorm() / static_cast<double>(n)));
        offset += n;
    }
    rep.converged = true;
    rep.termination = "not refined";
    return rep;
}

json intrinsic_errors(const CameraIntrinsics &K, const Distortion &d, const GroundTruth &t) {
    return {{"fx_rel", std::abs(K.fx - t.intrinsics.fx) / t.intrinsics.fx},
            {"fy_rel", std::abs(K.fy - t.intrinsics.fy) / t.intrinsics.fy},
            {"cx_px", std::abs(K.cx - t.intrinsics.cx)},
            {"cy_px", std::abs(K.cy - t.intrinsics.cy)},
            {"gamma", std::abs(K.gamma - t.intrinsics.gamma)},
            {"d1", std::abs(d.d1 - t.distortion.d1)},
            {"d2", std::abs(d.d2 - t.distortion.d2)}};
}

json spherical_errors(const SphericalState &s, const GroundTruth &t) {
    json e = intrinsic_errors(s.intrinsics, s.distortion, t);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto &v : t.t_cp) mean += v;
    mean /= static_cast<double>(t.t_cp.size());
    e["t_cp_mm"] = (s.extrinsics.t_cp() - mean).norm();
    double worst = 0.0;
    for (std::size_t i = 0; i < t.rotations.size() && i < s.extrinsics.rotations.size(); ++i)
        worst = std::max(worst, rotation_distance(s.extrinsics.rotations[i], t.rotations[i]));
    e["rotation_max_rad"] = worst;
    return e;
}

json spherical_json(const SphericalState &s) {
    json rots = json::array();
    for (const auto &R : s.extrinsics.rotations) rots.push_back(vec_json(R.axis_angle()));
    return {{"intrinsics", to_json(s.intrinsics)},
            {"distortion", to_json(s.distortion)},
            {"extrinsics", {{"t_cp_mm", vec_json(s.extrinsics.t_cp())}, {"rotations_axis_angle", rots}}}};
}

struct CalibrateArgs {
    std::string input;
    std::string mode;
    std::string reference;
    bool no_refine = false;
    std::string output;
};

int cmd_simulate(const std::string &config_path, const std::string &out_path) {
    const Document doc = read_document(config_path);
    const SyntheticConfig config = parse_synthetic_config(doc);
    const SyntheticScene scene = generate_scene(config, config.rng_seed);
    GroundTruth truth{config.intrinsics, config.distortion, {}, {}};
    for (const auto &pose : scene.poses) {
        truth.t_cp.push_back(pose.t_cp);
        truth.rotations.push_back(pose.R_pc);
    }
    write_text(out_path, dump(observation_file_json(scene.observations, {config.width, config.height}, truth,
                                                    to_json(config))));
    return exit_ok;
}

int cmd_build_db(const std::string &obs_path, const std::string &cam_path, const std::string &out_path) {
    const ObservationFile obs = parse_observation_file(read_document(obs_path));
    const CameraFile cam = parse_camera_file(read_document(cam_path));
    if (obs.observations.image_count() != 1)
        throw InputError(obs_path + ": reference file must hold exactly one image, found " +
                         std::to_string(obs.observations.image_count()));
    RayDatabase db;
    try {
        db = build_ray_database(obs.observations.images().front().points, cam.intrinsics, cam.distortion);
    } catch (const CalibrationError &e) {
        throw InputError(obs_path + ": " + e.what());
    }
    write_text(out_path, dump(ray_database_json(db, obs_path)));
    return exit_ok;
}

int cmd_calibrate(const CalibrateArgs &args) {
    const ObservationFile file = parse_observation_file(read_document(args.input));
    const ObservationSet &obs = file.observations;
    const std::size_t n = obs.image_count();
    if (args.mode == "nimg" && n < 3)
        throw InputError(args.input + ": nimg mode needs at least 3 images, found " + std::to_string(n));
    if (args.mode == "minimal" && n != 2)
        throw InputError(args.input + ": minimal mode needs exactly 2 images, found " + std::to_string(n));
    if (args.mode == "single" && n != 1)
        throw InputError(args.input + ": single mode needs exactly 1 image, found " + std::to_string(n));
    if (args.mode == "single" && args.reference.empty()) throw InputError("single mode requires --reference");
    if (args.mode != "single" && !args.reference.empty())
        throw InputError("--reference is only used in single mode");

    const DegeneracyOptions deg_opts;
    const DegeneracyReport deg = detect_degeneracy(obs, deg_opts);
    const RefinementConfig refinement;

    json report = {{"schema_version", kSchemaVersion},
                   {"kind", "calibration_report"},
                   {"tool_version", COLLIMCAL_VERSION},
                   {"units", {{"world", "mm"}, {"image", "px"}, {"angle", "rad"}}},
                   {"config",
                    {{"input", args.input},
                     {"mode", args.mode},
                     {"reference", args.reference},
                     {"refine", !args.no_refine},
                     {"refinement", to_json(refinement)},
                     {"degeneracy",
                      {{"translation_tolerance_px", deg_opts.translation_tolerance_px},
                       {"z_rotation_tolerance", deg_opts.z_rotation_tolerance},
                       {"min_rotation_angle", deg_opts.min_rotation_angle},
                       {"rank_tolerance", deg_opts.rank_tolerance}}}}},
                   {"degeneracy", degeneracy_json(deg)}};

    auto guarded = [&](auto &&solve) {
        try {
            return solve();
        } catch (const CalibrationError &e) {
            const bool structural =
                e.code() == ErrorCode::rank_deficient || e.code() == ErrorCode::degenerate_configuration;
            if (structural || deg.flagged()) throw DegenerateInput(e.what());
            throw;
        }
    };

    if (args.mode == "single") {
        const RayDatabase db = parse_ray_database(read_document(args.reference));
        SingleImageConfig cfg;
        cfg.refine = !args.no_refine;
        cfg.ba = refinement;
        if (file.image_size) {
            cfg.image_width = file.image_size->first;
            cfg.image_height = file.image_size->second;
        }
        report["config"]["image_size"] = {cfg.image_width, cfg.image_height};
        const SingleImageResult res = guarded([&] { return calibrate_single_image(obs.images().front(), db, cfg); });
        report["solver"] = "single_image";
        report["intrinsics"] = to_json(res.intrinsics);
        report["distortion"] = to_json(res.distortion);
        report["extrinsics"] = {{"rotation_axis_angle", vec_json(res.rotation.axis_angle())}};
        report["residuals"] = residual_json(res.report);
        report["matched_points"] = res.matched;
        report["dropped_points"] = res.dropped;
        report["initial_focal_px"] = res.initial_focal;
        if (file.ground_truth) report["error_vs_truth"] = intrinsic_errors(res.intrinsics, res.distortion, *file.ground_truth);
    } else {
        if (args.mode == "nimg" && deg.rank < LinearSystem::kColumns)
            throw DegenerateInput("constraint matrix has rank " + std::to_string(deg.rank) + " < " +
                                  std::to_string(LinearSystem::kColumns));
        if (args.mode == "minimal" && deg.flagged())
            throw DegenerateInput("the image pair is a degenerate motion");

        SphericalSolution init;
        if (args.mode == "nimg") {
            init = guarded([&] { return solve_closed_form(obs); });
            report["solver"] = "closed_form";
        } else {
            const auto candidates = guarded([&] { return solve_minimal(obs); });
            if (candidates.empty()) throw DegenerateInput("minimal solver returned no admissible candidate");
            init = candidates.front().solution;
            report["solver"] = "minimal";
            report["candidate_count"] = candidates.size();
        }
        SphericalState state{init.intrinsics, Distortion{}, init.extrinsics};
        ResidualReport residuals;
        if (args.no_refine) {
            residuals = spherical_report(obs, state);
        } else {
            const SphericalBAResult ba = guarded([&] { return spherical_ba(obs, state, refinement); });
            state = ba.state;
            residuals = ba.report;
            report["solver"] = report["solver"].get<std::string>() + "+bundle_adjustment";
        }
        report.update(spherical_json(state));
        report["residuals"] = residual_json(residuals);
        if (file.ground_truth) report["error_vs_truth"] = spherical_errors(state, *file.ground_truth);
    }
    write_text(args.output, dump(report));
    return exit_ok;
}

int cmd_benchmark(const std::string &config_path, const std::string &sweep, const std::string &out_path,
                  bool timing, unsigned threads) {
    const BenchmarkFile bench = parse_benchmark_file(read_document(config_path));
    MonteCarloOptions opts;
    try {
        opts.kind = parse_sweep_kind(sweep);
    } catch (const CalibrationError &e) {
        throw InputError(e.detail());
    }
    opts.values = bench.sweep_values.empty() ? default_sweep_values(opts.kind) : bench.sweep_values;
    opts.solvers = bench.solvers;
    opts.refinement = bench.refinement;
    opts.threads = threads;
    for (double v : opts.values) {
        try {
            apply_sweep(bench.config, opts.kind, v).validate();
        } catch (const CalibrationError &e) {
            throw InputError(config_path + ": sweep value " + std::to_string(v) + ": " + e.detail());
        }
    }

    const auto stats = run_monte_carlo(bench.config, opts);
    std::ostringstream csv;
    write_benchmark_csv(csv, stats, timing);
    write_text(out_path, csv.str());

    std::string over_budget;
    for (const auto &point : stats)
        for (const auto &m : point.methods)
            if (m.failed())
                over_budget += " " + m.solver + "/" + m.stage + "@" + std::to_string(point.sweep_value);
    if (!over_budget.empty()) throw std::runtime_error("failure budget exceeded at" + over_budget);
    return exit_ok;
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Camera calibration with collimator spherical motion"};
    app.set_version_flag("--version", std::string(COLLIMCAL_VERSION));
    app.require_subcommand(1);

    std::string config_path, out_path;
    auto *sim = app.add_subcommand("simulate", "Render a synthetic observation file");
    sim->add_option("--config", config_path, "Synthetic config (JSON)")->required();
    sim->add_option("--out", out_path, "Output observation file")->required();

    CalibrateArgs cal;
    auto *calc = app.add_subcommand("calibrate", "Calibrate from an observation file");
    calc->add_option("--in", cal.input, "Observation file")->required();
    calc->add_option("--mode", cal.mode, "nimg | minimal | single")
        ->required()
        ->check(CLI::IsMember({"nimg", "minimal", "single"}));
    calc->add_option("--reference", cal.reference, "Ray database (single mode)");
    calc->add_flag("--no-refine", cal.no_refine, "Skip bundle adjustment");
    calc->add_option("--out", cal.output, "Output report")->required();

    std::string ref_obs, ref_cam;
    auto *db = app.add_subcommand("build-db", "Build a ray database from a reference image");
    db->add_option("--ref-obs", ref_obs, "Single-image observation file")->required();
    db->add_option("--ref-cam", ref_cam, "Reference camera file")->required();
    db->add_option("--out", out_path, "Output database")->required();

    std::string sweep;
    bool timing = false;
    unsigned threads = 0;
    auto *bench = app.add_subcommand("benchmark", "Monte Carlo sweep to CSV");
    bench->add_option("--config", config_path, "Benchmark config (JSON)")->required();
    bench->add_option("--sweep", sweep, "noise | images | spherical")
        ->required()
        ->check(CLI::IsMember({"noise", "images", "spherical"}));
    bench->add_option("--out", out_path, "Output CSV")->required();
    bench->add_flag("--timing", timing, "Write measured ms_per_trial instead of NA");
    bench->add_option("--threads", threads, "Worker threads (0: COLLIMCAL_THREADS or all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_input;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_path);
        if (calc->parsed()) return cmd_calibrate(cal);
        if (db->parsed()) return cmd_build_db(ref_obs, ref_cam, out_path);
        if (bench->parsed()) return cmd_benchmark(config_path, sweep, out_path, timing, threads);
    } catch (const InputError &e) {
        err << "error: invalid input: " << e.what() << "\n";
        return exit_input;
    } catch (const DegenerateInput &e) {
        err << "error: degenerate configuration: " << e.what() << "\n";
        return exit_degenerate;
    } catch (const CalibrationError &e) {
        err << "error: solver failure (" << to_string(e.code()) << "): " << e.detail() << "\n";
        return e.code() == ErrorCode::invalid_input ? exit_input : exit_solver;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return exit_solver;
    }
    return exit_input;
}

} // namespace collimcal::cli
