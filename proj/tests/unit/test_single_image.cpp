#include "support.hpp"

#include "collimcal/error.hpp"
#include "collimcal/single_image.hpp"
#include "collimcal/synth.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <random>

using namespace collimcal;
using namespace collimcal::testing;

namespace {

const CameraIntrinsics kRefK{1200, 1190, 530, 470, 0};
const Distortion kRefD{0.05, -0.1};

SyntheticConfig calib_config(const CameraIntrinsics &K, const Distortion &d, double sigma) {
    SyntheticConfig c;
    c.intrinsics = K;
    c.distortion = d;
    c.pixel_noise_sigma = sigma;
    c.image_count = 1;
    c.min_visible_points = 88;
    return c;
}

std::vector<PixelRay> pixel_rays(const SingleImageScene &sc, const RayDatabase &db) {
    std::vector<PixelRay> out;
    for (const auto &p : sc.calibration.points) out.emplace_back(p.pixel, db.rays.at(p.id));
    return out;
}

} // namespace

TEST(RayDatabase, PrincipalPointIsOpticalAxis) {
    std::vector<ImagePoint> pts;
    for (int i = 0; i < 8; ++i) pts.push_back({i, Eigen::Vector2d(kRefK.cx + 40 * i, kRefK.cy - 10 * i)});
    const RayDatabase db = build_ray_database(pts, kRefK, kRefD);
    EXPECT_LT((db.rays.at(0) - Eigen::Vector3d::UnitZ()).norm(), 1e-15);
}

TEST(RayDatabase, AnglesMatchGeneratorGeometry) {
    const SyntheticConfig c = calib_config({1000, 1000, 542, 478, 0.01}, {}, 0.0);
    const SingleImageScene sc = generate_single_image_scene(c, kRefK, kRefD, 5);
    const RayDatabase db = build_ray_database(sc.reference, kRefK, kRefD);
    const PlanarTarget target = PlanarTarget::grid(c.target.rows, c.target.cols, c.target.square_mm);
    const auto &pose = sc.reference_pose;
    auto direction = [&](PointId id) {
        const auto &tp = target.at(id);
        return Eigen::Vector3d(pose.R_pc * (Eigen::Vector3d(tp.x, tp.y, 0.0) - pose.t_cp));
    };
    for (const auto &[i, ri] : db.rays)
        for (const auto &[j, rj] : db.rays)
            if (i < j) {
                EXPECT_NEAR(angular_distance(ri, rj), angular_distance(direction(i), direction(j)), 1e-10);
            }
}

TEST(RayDatabase, RejectsBadInput) {
    std::vector<ImagePoint> pts;
    for (int i = 0; i < 8; ++i) pts.push_back({i, Eigen::Vector2d(500 + 10 * i, 400)});
    auto dup = pts;
    dup[3].id = 1;
    EXPECT_THROW(build_ray_database(dup, kRefK, kRefD), CalibrationError);
    pts.pop_back();
    EXPECT_THROW(build_ray_database(pts, kRefK, kRefD), CalibrationError);

    RayDatabase db;
    db.rays[0] = Eigen::Vector3d(0, 0, 1.0 + 1e-9);
    EXPECT_THROW(db.validate(), CalibrationError);
}

TEST(FocalQuartic, NoiselessCenteredCamera) {
    const SyntheticConfig c = calib_config({1000, 1000, 540, 480, 0}, {}, 0.0);
    const SingleImageScene sc = generate_single_image_scene(c, kRefK, kRefD, 7);
    const RayDatabase db = build_ray_database(sc.reference, kRefK, kRefD);
    EXPECT_LT(rel_err(init_focal_quartic(pixel_rays(sc, db), c.width, c.height), 1000.0), 1e-6);
}

TEST(FocalQuartic, OffCenterPrincipalPoint) {
    const SyntheticConfig c = calib_config({1000, 1000, 542, 478, 0}, {}, 0.0);
    const SingleImageScene sc = generate_single_image_scene(c, kRefK, kRefD, 7);
    const RayDatabase db = build_ray_database(sc.reference, kRefK, kRefD);
    EXPECT_LT(rel_err(init_focal_quartic(pixel_rays(sc, db), c.width, c.height), 1000.0), 0.01);
}

TEST(FocalQuartic, IdenticalRaysCarryNoInformation) {
    std::vector<PixelRay> corr;
    for (int i = 0; i < 10; ++i) corr.emplace_back(Eigen::Vector2d(100 + 50 * i, 200 + 30 * i), Eigen::Vector3d::UnitZ());
    EXPECT_THROW(init_focal_quartic(corr, 1080, 960), CalibrationError);
}

TEST(AngleRefine, TruthIsFixedPoint) {
    const CameraIntrinsics K{1000, 1000, 542, 478, 0.01};
    const SingleImageScene sc = generate_single_image_scene(calib_config(K, {}, 0.0), kRefK, kRefD, 9);
    const RayDatabase db = build_ray_database(sc.reference, kRefK, kRefD);
    const AngleRefineResult r = refine_intrinsics_angle(pixel_rays(sc, db), K);
    EXPECT_LT(r.report.cost_trajectory.front(), 1e-24);
    EXPECT_LT(intrinsics_rel_err(r.intrinsics, K), 1e-10);
}

TEST(AngleRefine, ConvergesFromQuarticAndIsStrategyRobust) {
    const CameraIntrinsics K{1000, 1000, 542, 478, 0.01};
    const SyntheticConfig c = calib_config(K, {}, 0.0);
    const SingleImageScene sc = generate_single_image_scene(c, kRefK, kRefD, 9);
    const RayDatabase db = build_ray_database(sc.reference, kRefK, kRefD);
    const auto corr = pixel_rays(sc, db);
    const double f0 = init_focal_quartic(corr, c.width, c.height);
    const CameraIntrinsics K0{f0, f0, 0.5 * c.width, 0.5 * c.height, 0.0};

    AngleRefineConfig all;
    all.strategy = PairStrategy::all_pairs;
    const CameraIntrinsics Ka = refine_intrinsics_angle(corr, K0, all).intrinsics;
    EXPECT_LT(rel_err(Ka.fx, K.fx), 1e-3);
    EXPECT_LT(rel_err(Ka.fy, K.fy), 1e-3);
    EXPECT_LT((Eigen::Vector2d(Ka.cx, Ka.cy) - Eigen::Vector2d(K.cx, K.cy)).norm(), 0.5);

    AngleRefineConfig star;
    star.strategy = PairStrategy::star;
    const CameraIntrinsics Ks = refine_intrinsics_angle(corr, K0, star).intrinsics;
    EXPECT_LT(rel_err(Ks.fx, Ka.fx), 5e-4);
    EXPECT_LT(rel_err(Ks.fy, Ka.fy), 5e-4);
}

TEST(PairSelection, Strategies) {
    AngleRefineConfig c;
    EXPECT_EQ(select_pairs(10, c).size(), 45u);
    c.strategy = PairStrategy::star;
    EXPECT_EQ(select_pairs(10, c).size(), 9u);
    c.strategy = PairStrategy::automatic;
    const auto many = select_pairs(200, c);
    EXPECT_LT(many.size(), 200u * 199u / 2u);
    EXPECT_EQ(many, select_pairs(200, c));
}

TEST(Kabsch, IdentityAndRandomRotations) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Eigen::Vector3d> db;
    for (int i = 0; i < 40; ++i) db.push_back(Eigen::Vector3d(n(rng) * 0.3, n(rng) * 0.3, 1.0).normalized());
    EXPECT_LT(rotation_distance(estimate_rotation_kabsch(db, db), Rotation()), 1e-12);
    for (int k = 0; k < 100; ++k) {
        const Rotation Q = Rotation::from_axis_angle(Eigen::Vector3d(n(rng), n(rng), n(rng)));
        std::vector<Eigen::Vector3d> calib;
        for (const auto &v : db) calib.push_back(Q * v);
        EXPECT_LT(rotation_distance(estimate_rotation_kabsch(calib, db), Q), 1e-10);
    }
}

TEST(Kabsch, PlanarBundleGivesProperRotation) {
    std::vector<Eigen::Vector3d> db, calib;
    for (int i = 0; i < 12; ++i) {
        const double a = 0.2 * i;
        db.push_back(Eigen::Vector3d(std::cos(a), std::sin(a), 0.0));
        calib.push_back(Eigen::Vector3d(std::cos(a), -std::sin(a), 0.0)); // mirror image
    }
    EXPECT_NEAR(estimate_rotation_kabsch(calib, db).matrix().determinant(), 1.0, 1e-12);
}

TEST(SingleImagePipeline, NoiselessUndistorted) {
    const CameraIntrinsics K{1000, 1000, 542, 478, 0.01};
    const SingleImageScene sc = generate_single_image_scene(calib_config(K, {}, 0.0), kRefK, kRefD, 13);
    const RayDatabase db = build_ray_database(sc.reference, kRefK, kRefD);
    const SingleImageResult r = calibrate_single_image(sc.calibration, db);
    EXPECT_LT(intrinsics_rel_err(r.intrinsics, K), 1e-6);
    EXPECT_LT(rotation_distance(r.rotation, sc.relative_rotation()), 1e-8);
    EXPECT_EQ(r.matched, sc.calibration.points.size());
}

TEST(SingleImagePipeline, RecoversTrueDistortion) {
    const CameraIntrinsics K{1000, 1000, 542, 478, 0.01};
    const Distortion d{0.1, -0.2};
    const SingleImageScene sc = generate_single_image_scene(calib_config(K, d, 0.0), kRefK, kRefD, 13);
    const SingleImageResult r = calibrate_single_image(sc.calibration, build_ray_database(sc.reference, kRefK, kRefD));
    EXPECT_LT(std::abs(r.distortion.d1 - d.d1), 1e-4);
    EXPECT_LT(std::abs(r.distortion.d2 - d.d2), 1e-4);
}

TEST(SingleImagePipeline, NoisyDistortedWithinBudget) {
    const CameraIntrinsics K{1000, 1000, 542, 478, 0.01};
    const SingleImageScene sc =
        generate_single_image_scene(calib_config(K, {0.1, -0.2}, 0.5), kRefK, kRefD, 17);
    ASSERT_EQ(sc.calibration.points.size(), 88u);
    const SingleImageResult r = calibrate_single_image(sc.calibration, build_ray_database(sc.reference, kRefK, kRefD));
    EXPECT_LT(rel_err(r.intrinsics.fx, K.fx), 0.01);
    EXPECT_GE(r.report.rms_reprojection, 0.3);
    EXPECT_LE(r.report.rms_reprojection, 0.7);
}

TEST(SingleImagePipeline, TooFewMatches) {
    const CameraIntrinsics K{1000, 1000, 542, 478, 0.01};
    const SingleImageScene sc = generate_single_image_scene(calib_config(K, {}, 0.0), kRefK, kRefD, 13);
    std::vector<ImagePoint> few(sc.reference.begin(), sc.reference.begin() + 8);
    const RayDatabase db = build_ray_database(few, kRefK, kRefD);
    const PointId removed = few.front().id;
    ImageObservations obs = sc.calibration;
    std::erase_if(obs.points, [&](const ImagePoint &p) { return p.id == removed; });
    try {
        calibrate_single_image(obs, db);
        FAIL() << "expected insufficient_points";
    } catch (const CalibrationError &e) {
        EXPECT_EQ(e.code(), ErrorCode::insufficient_points);
    }
}

TEST(SingleImagePipeline, NoRefineStopsAfterRotation) {
    const CameraIntrinsics K{1000, 1000, 542, 478, 0.01};
    const SingleImageScene sc = generate_single_image_scene(calib_config(K, {}, 0.0), kRefK, kRefD, 13);
    SingleImageConfig cfg;
    cfg.refine = false;
    const SingleImageResult r = calibrate_single_image(sc.calibration, build_ray_database(sc.reference, kRefK, kRefD), cfg);
    EXPECT_EQ(r.report.iterations_used, 0);
    EXPECT_EQ(r.intrinsics.fx, r.angle_intrinsics.fx);
    EXPECT_TRUE(r.distortion.is_zero());
}
