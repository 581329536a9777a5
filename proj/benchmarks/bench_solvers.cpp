#include "collimcal/bundle.hpp"
#include "collimcal/monte_carlo.hpp"
#include "collimcal/multi_solver.hpp"
#include "collimcal/single_image.hpp"
#include "collimcal/synth.hpp"

#include <benchmark/benchmark.h>

using namespace collimcal;

namespace {

SyntheticConfig noisy(int images) {
    SyntheticConfig c;
    c.image_count = images;
    return c;
}

void BM_Homography(benchmark::State &state) {
    const SyntheticScene sc = generate_scene(noisy(1), 1);
    const auto corr = sc.observations.correspondences(0);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_homography(corr));
}
BENCHMARK(BM_Homography);

void BM_ClosedForm(benchmark::State &state) {
    const SyntheticScene sc = generate_scene(noisy(static_cast<int>(state.range(0))), 2);
    for (auto _ : state) benchmark::DoNotOptimize(solve_closed_form(sc.observations));
}
BENCHMARK(BM_ClosedForm)->Arg(3)->Arg(15)->Arg(30)->Unit(benchmark::kMicrosecond);

void BM_Minimal(benchmark::State &state) {
    const SyntheticScene sc = generate_scene(noisy(2), 3);
    for (auto _ : state) benchmark::DoNotOptimize(solve_minimal(sc.observations));
}
BENCHMARK(BM_Minimal)->Unit(benchmark::kMicrosecond);

void BM_Zhang(benchmark::State &state) {
    const SyntheticScene sc = generate_scene(noisy(15), 4);
    for (auto _ : state) benchmark::DoNotOptimize(zhang_calibrate(sc.observations));
}
BENCHMARK(BM_Zhang)->Unit(benchmark::kMicrosecond);

void BM_SphericalBa(benchmark::State &state) {
    const SyntheticScene sc = generate_scene(noisy(15), 5);
    const SphericalSolution init = solve_closed_form(sc.observations);
    for (auto _ : state)
        benchmark::DoNotOptimize(spherical_ba(sc.observations, {init.intrinsics, {}, init.extrinsics}, {}));
}
BENCHMARK(BM_SphericalBa)->Unit(benchmark::kMillisecond);

void BM_PlanarBa(benchmark::State &state) {
    const SyntheticScene sc = generate_scene(noisy(15), 6);
    const ZhangSolution z = zhang_calibrate(sc.observations);
    PlanarState init{z.intrinsics, {}, {}, {}};
    for (const auto &p : z.poses) {
        init.rotations.push_back(p.R);
        init.translations.push_back(p.t);
    }
    for (auto _ : state) benchmark::DoNotOptimize(planar_ba(sc.observations, init, {}));
}
BENCHMARK(BM_PlanarBa)->Unit(benchmark::kMillisecond);

void BM_SingleImage(benchmark::State &state) {
    SyntheticConfig c = noisy(1);
    c.min_visible_points = 88;
    const CameraIntrinsics ref_K{1200, 1190, 530, 470, 0};
    const SingleImageScene sc = generate_single_image_scene(c, ref_K, {}, 7);
    const RayDatabase db = build_ray_database(sc.reference, ref_K, {});
    for (auto _ : state) benchmark::DoNotOptimize(calibrate_single_image(sc.calibration, db));
}
BENCHMARK(BM_SingleImage)->Unit(benchmark::kMillisecond);

void BM_MonteCarloSweepPoint(benchmark::State &state) {
    SyntheticConfig c;
    c.trial_count = 8;
    MonteCarloOptions o;
    o.values = {1.0};
    o.threads = static_cast<unsigned>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(c, o));
}
BENCHMARK(BM_MonteCarloSweepPoint)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
