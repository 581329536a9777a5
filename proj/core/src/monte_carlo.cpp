#include "collimcal/monte_carlo.hpp"

#include "collimcal/bundle.hpp"
#include "collimcal/error.hpp"
#include "collimcal/multi_solver.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <thread>

namespace collimcal {

namespace {

enum MethodSlot { kOursInit = 0, kOursRefined, kZhangInit, kZhangRefined, kSlotCount };

struct SlotInfo {
    const char *solver;
    const char *stage;
};
constexpr SlotInfo kSlots[kSlotCount] = {{"ours", "init"}, {"ours", "refined"}, {"zhang", "init"}, {"zhang", "refined"}};

bool selected(const SolverSelection &s, int slot) {
    switch (slot) {
    case kOursInit: return s.ours;
    case kOursRefined: return s.ours_refined;
    case kZhangInit: return s.zhang;
    case kZhangRefined: return s.zhang_refined;
    default: return false;
    }
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

template <typename F> TrialOutcome timed(F &&f) {
    TrialOutcome out;
    const auto t0 = Clock::now();
    try {
        out.estimate = f();
        out.ok = true;
    } catch (const CalibrationError &e) {
        out.error = e.what();
    }
    out.ms = elapsed_ms(t0);
    return out;
}

Eigen::Vector3d mean_camera_center(const std::vector<Rotation> &Rs, const std::vector<Eigen::Vector3d> &ts) {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < Rs.size(); ++i) c += -(Rs[i].matrix().transpose() * ts[i]);
    return c / static_cast<double>(Rs.size());
}

std::array<TrialOutcome, kSlotCount> run_trial(const SyntheticConfig &config, const MonteCarloOptions &options,
                                               std::uint64_t seed) {
    std::array<TrialOutcome, kSlotCount> out;
    SyntheticScene scene;
    try {
        scene = generate_scene(config, seed);
    } catch (const CalibrationError &e) {
        for (auto &o : out) o.error = e.what();
        return out;
    }
    const ObservationSet &obs = scene.observations;
    const SolverSelection &sel = options.solvers;

    SphericalSolution ours;
    bool ours_ok = false;
    if (sel.ours || sel.ours_refined) {
        out[kOursInit] = timed([&] {
            ours = solve_closed_form(obs);
            return ParameterEstimate{ours.intrinsics, {}, ours.extrinsics.t_cp()};
        });
        ours_ok = out[kOursInit].ok;
    }
    if (sel.ours_refined) {
        if (ours_ok) {
            const double init_ms = out[kOursInit].ms;
            std::vector<double> trajectory;
            out[kOursRefined] = timed([&] {
                const auto ba = spherical_ba(obs, {ours.intrinsics, {}, ours.extrinsics}, options.refinement);
                trajectory = ba.report.cost_trajectory;
                return ParameterEstimate{ba.state.intrinsics, ba.state.distortion, ba.state.extrinsics.t_cp()};
            });
            out[kOursRefined].ms += init_ms;
            out[kOursRefined].cost_trajectory = std::move(trajectory);
        } else {
            out[kOursRefined].error = out[kOursInit].error;
        }
    }

    ZhangSolution zhang;
    bool zhang_ok = false;
    if (sel.zhang || sel.zhang_refined) {
        out[kZhangInit] = timed([&] {
            zhang = zhang_calibrate(obs);
            std::vector<Rotation> Rs;
            std::vector<Eigen::Vector3d> ts;
            for (const auto &p : zhang.poses) {
                Rs.push_back(p.R);
                ts.push_back(p.t);
            }
            return ParameterEstimate{zhang.intrinsics, {}, mean_camera_center(Rs, ts)};
        });
        zhang_ok = out[kZhangInit].ok;
    }
    if (sel.zhang_refined) {
        if (zhang_ok) {
            const double init_ms = out[kZhangInit].ms;
            std::vector<double> trajectory;
            out[kZhangRefined] = timed([&] {
                PlanarState init{zhang.intrinsics, {}, {}, {}};
                for (const auto &p : zhang.poses) {
                    init.rotations.push_back(p.R);
                    init.translations.push_back(p.t);
                }
                const auto ba = planar_ba(obs, init, options.refinement);
                trajectory = ba.report.cost_trajectory;
                return ParameterEstimate{ba.state.intrinsics, ba.state.distortion,
                                         mean_camera_center(ba.state.rotations, ba.state.translations)};
            });
            out[kZhangRefined].ms += init_ms;
            out[kZhangRefined].cost_trajectory = std::move(trajectory);
        } else {
            out[kZhangRefined].error = out[kZhangInit].error;
        }
    }
    return out;
}

double sample_std(const std::vector<double> &v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

SweepKind parse_sweep_kind(const std::string &name) {
    if (name == "noise") return SweepKind::noise;
    if (name == "images") return SweepKind::images;
    if (name == "spherical") return SweepKind::spherical;
    fail(ErrorCode::invalid_input, "unknown sweep '" + name + "' (expected noise, images or spherical)");
}

std::string to_string(SweepKind kind) {
    switch (kind) {
    case SweepKind::noise: return "noise";
    case SweepKind::images: return "images";
    case SweepKind::spherical: return "spherical";
    }
    return "unknown";
}

std::vector<double> default_sweep_values(SweepKind kind) {
    std::vector<double> v;
    switch (kind) {
    case SweepKind::noise:
        for (int i = 0; i <= 6; ++i) v.push_back(0.5 * i);
        break;
    case SweepKind::images:
        for (int n : {3, 4, 5, 6, 8, 10, 15, 20, 25, 30}) v.push_back(n);
        break;
    case SweepKind::spherical:
        for (int i = 0; i <= 6; ++i) v.push_back(5.0 * i);
        break;
    }
    return v;
}

const MethodStats &TrialStats::method(const std::string &solver, const std::string &stage) const {
    for (const auto &m : methods)
        if (m.solver == solver && m.stage == stage) return m;
    fail(ErrorCode::invalid_input, "no results for " + solver + "/" + stage);
}

std::uint64_t trial_seed(std::uint64_t rng_seed, int trial_index) {
    return mix_seed(rng_seed, static_cast<std::uint64_t>(trial_index));
}

SyntheticConfig apply_sweep(const SyntheticConfig &base, SweepKind kind, double value) {
    SyntheticConfig c = base;
    switch (kind) {
    case SweepKind::noise: c.pixel_noise_sigma = value; break;
    case SweepKind::images:
        if (value < 1.0 || value != std::floor(value)) fail(ErrorCode::invalid_input, "image counts must be integers");
        c.image_count = static_cast<int>(value);
        break;
    case SweepKind::spherical: c.spherical_noise_sigma = value; break;
    }
    c.validate();
    return c;
}

ErrorSummary summarize(const std::vector<TrialOutcome> &trials, const SyntheticConfig &truth) {
    ErrorSummary s;
    s.trials = static_cast<int>(trials.size());
    const CameraIntrinsics &K = truth.intrinsics;
    const Eigen::Vector3d t_cp = truth.t_cp();
    std::vector<double> fx, cxy;
    double fy = 0, cx = 0, cy = 0, g = 0, d1 = 0, d2 = 0, x = 0, y = 0, r = 0, tcp = 0, ms = 0;
    for (const auto &t : trials) {
        ms += t.ms;
        if (!t.ok) {
            ++s.fail_count;
            continue;
        }
        const auto &e = t.estimate;
        fx.push_back(100.0 * std::abs(e.intrinsics.fx - K.fx) / K.fx);
        cxy.push_back(std::hypot(e.intrinsics.cx - K.cx, e.intrinsics.cy - K.cy));
        fy += 100.0 * std::abs(e.intrinsics.fy - K.fy) / K.fy;
        cx += std::abs(e.intrinsics.cx - K.cx);
        cy += std::abs(e.intrinsics.cy - K.cy);
        g += std::abs(e.intrinsics.gamma - K.gamma);
        d1 += std::abs(e.distortion.d1 - truth.distortion.d1);
        d2 += std::abs(e.distortion.d2 - truth.distortion.d2);
        x += std::abs(e.t_cp.x() - t_cp.x());
        y += std::abs(e.t_cp.y() - t_cp.y());
        r += std::abs(e.t_cp.z() - t_cp.z());
        tcp += (e.t_cp - t_cp).norm();
    }
    const auto ok = static_cast<double>(fx.size());
    if (!trials.empty()) s.ms_mean = ms / static_cast<double>(trials.size());
    if (ok == 0) return s;
    for (double v : fx) s.fx_rel_mean += v;
    for (double v : cxy) s.cxy_mean += v;
    s.fx_rel_mean /= ok;
    s.cxy_mean /= ok;
    s.fx_rel_std = sample_std(fx, s.fx_rel_mean);
    s.cxy_std = sample_std(cxy, s.cxy_mean);
    s.fy_rel_mean = fy / ok;
    s.cx_abs_mean = cx / ok;
    s.cy_abs_mean = cy / ok;
    s.gamma_abs_mean = g / ok;
    s.d1_abs_mean = d1 / ok;
    s.d2_abs_mean = d2 / ok;
    s.x_abs_mean = x / ok;
    s.y_abs_mean = y / ok;
    s.r_abs_mean = r / ok;
    s.tcp_mean = tcp / ok;
    return s;
}

unsigned resolve_thread_count(unsigned requested) {
    unsigned n = requested;
    if (n == 0) {
        if (const char *env = std::getenv("COLLIMCAL_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v > 0) n = static_cast<unsigned>(v);
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

std::vector<TrialStats> run_monte_carlo(const SyntheticConfig &config, const MonteCarloOptions &options) {
    config.validate();
    options.refinement.validate();
    const std::vector<double> values = options.values.empty() ? default_sweep_values(options.kind) : options.values;

    std::vector<TrialStats> stats;
    for (double v : values) {
        TrialStats ts;
        ts.sweep_value = v;
        ts.config = apply_sweep(config, options.kind, v);
        stats.push_back(std::move(ts));
    }

    const std::size_t trials = static_cast<std::size_t>(config.trial_count);
    const std::size_t tasks = stats.size() * trials;
    std::vector<std::array<TrialOutcome, kSlotCount>> slots(tasks);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < tasks; k = next++) {
            const std::size_t point = k / trials;
            const int trial = static_cast<int>(k % trials);
            slots[k] = run_trial(stats[point].config, options, trial_seed(config.rng_seed, trial));
        }
    };
    const unsigned n_threads = std::min<std::size_t>(resolve_thread_count(options.threads), std::max<std::size_t>(tasks, 1));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto &t : pool) t.join();
    }

    for (std::size_t p = 0; p < stats.size(); ++p) {
        for (int slot = 0; slot < kSlotCount; ++slot) {
            if (!selected(options.solvers, slot)) continue;
            MethodStats m;
            m.solver = kSlots[slot].solver;
            m.stage = kSlots[slot].stage;
            for (std::size_t t = 0; t < trials; ++t) m.trials.push_back(slots[p * trials + t][static_cast<std::size_t>(slot)]);
            m.summary = summarize(m.trials, stats[p].config);
            stats[p].methods.push_back(std::move(m));
        }
    }
    return stats;
}

void write_benchmark_csv(std::ostream &out, const std::vector<TrialStats> &stats, bool include_timing) {
    out << "sweep_value,solver,stage,fx_err_rel_mean,fx_err_rel_std,cxy_err_px_mean,cxy_err_px_std,d1_err_mean,"
           "d2_err_mean,tcp_err_mm_mean,fail_count,ms_per_trial\n";
    for (const auto &ts : stats) {
        for (const auto &m : ts.methods) {
            const ErrorSummary &s = m.summary;
            out << format_number(ts.sweep_value) << ',' << m.solver << ',' << m.stage << ',' << format_number(s.fx_rel_mean)
                << ',' << format_number(s.fx_rel_std) << ',' << format_number(s.cxy_mean) << ','
                << format_number(s.cxy_std) << ',' << format_number(s.d1_abs_mean) << ','
                << format_number(s.d2_abs_mean) << ',' << format_number(s.tcp_mean) << ',' << s.fail_count << ','
                << (include_timing ? format_number(s.ms_mean) : std::string("NA")) << '\n';
        }
    }
}

} // namespace collimcal
