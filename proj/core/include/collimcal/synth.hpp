#pragma once

#include "collimcal/camera.hpp"
#include "collimcal/homography.hpp"
#include "collimcal/observations.hpp"
#include "collimcal/rotation.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace collimcal {

struct GridSpec {
    int rows = 8;
    int cols = 11;
    double square_mm = 30.0;
};

struct SyntheticConfig {
    CameraIntrinsics intrinsics{1000.0, 1000.0, 542.0, 478.0, 0.01};
    Distortion distortion{0.1, -0.2};
    int width = 1080;
    int height = 960;
    GridSpec target;
    double radius_mm = 700.0;
    Eigen::Vector2d target_offset{150.0, 105.0}; // (x, y) of t_cp, mm
    double pixel_noise_sigma = 0.5;              // per coordinate
    double spherical_noise_sigma = 0.0;          // per t_cp coordinate, mm
    int image_count = 15;
    int trial_count = 200;
    std::uint64_t rng_seed = 20240917;
    double max_angle_deg = 30.0;
    int min_visible_points = 20;
    int max_resample_attempts = 100;

    /// Throws invalid_input.
    void validate() const;

    Eigen::Vector3d t_cp() const { return {target_offset.x(), target_offset.y(), -radius_mm}; }
};

/// Target pose of one image: P_c = R_pc (P - t_cp).
struct SphericalPose {
    Rotation R_pc;
    Eigen::Vector3d t_cp = Eigen::Vector3d::Zero();

    Eigen::Vector3d translation() const { return -(R_pc * t_cp); }
    /// [r1 r2 -R t_cp]; its determinant is r for an exact spherical pose.
    Eigen::Matrix3d motion_matrix() const;
};

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Uniform axis, angle uniform in [0, max_angle]; each image resampled until at least
/// min_visible_points project inside the image. Per-image streams derived from seed.
std::vector<SphericalPose> generate_spherical_poses(const SyntheticConfig &config, std::uint64_t seed);

/// Projects the grid through the full camera model and adds per-coordinate Gaussian noise.
/// Points outside the image (noiseless projection) are dropped.
ObservationSet render_observations(const std::vector<SphericalPose> &poses, const SyntheticConfig &config,
                                   std::uint64_t seed);

/// Collimated rendering: each target point is a direction (X - x, Y - y, r) at infinity,
/// so any camera translation leaves the pixels unchanged.
ImageObservations render_collimated(const Rotation &R_pc, const Eigen::Vector3d &camera_translation,
                                    const SyntheticConfig &config);

struct SyntheticScene {
    std::vector<SphericalPose> poses;
    ObservationSet observations;
};

SyntheticScene generate_scene(const SyntheticConfig &config, std::uint64_t trial_seed);

/// Reference and calibration views of the same collimated target under one optical center.
struct SingleImageScene {
    SphericalPose reference_pose;
    SphericalPose calibration_pose;
    std::vector<ImagePoint> reference; // seen through the reference camera
    ImageObservations calibration;     // seen through config.intrinsics / config.distortion

    /// R_c'c = R_pc R_pc'^T
    Rotation relative_rotation() const { return calibration_pose.R_pc * reference_pose.R_pc.transpose(); }
};

SingleImageScene generate_single_image_scene(const SyntheticConfig &config, const CameraIntrinsics &reference_K,
                                             const Distortion &reference_d, std::uint64_t seed,
                                             double reference_noise_sigma = 0.0);

/// Plane-based baseline without the motion constraint.
struct ZhangSolution {
    CameraIntrinsics intrinsics;
    std::vector<HomographyPose> poses;
};

/// Requires >= 3 images. Throws rank_deficient / not_positive_definite.
CameraIntrinsics zhang_init(const ObservationSet &observations);
ZhangSolution zhang_calibrate(const ObservationSet &observations);

} // namespace collimcal
