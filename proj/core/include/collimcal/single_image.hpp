#pragma once

#include "collimcal/bundle.hpp"
#include "collimcal/camera.hpp"
#include "collimcal/lm.hpp"
#include "collimcal/observations.hpp"
#include "collimcal/rotation.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace collimcal {

/// Unit rays of a reference image, keyed by point id.
struct RayDatabase {
    std::map<PointId, Eigen::Vector3d> rays;
    CameraIntrinsics reference_intrinsics;
    Distortion reference_distortion;

    /// Throws invalid_input when a ray is not unit-norm within 1e-12.
    void validate() const;
};

/// Requires >= 8 points with unique ids.
RayDatabase build_ray_database(const std::vector<ImagePoint> &reference, const CameraIntrinsics &K,
                               const Distortion &d);

/// (calibration pixel, database ray)
using PixelRay = std::pair<Eigen::Vector2d, Eigen::Vector3d>;

/// Focal length under f = fx = fy, zero skew and a centered principal point, from the
/// quadratic in 1/f^2 obtained by summing the per-pair cosine equations.
double init_focal_quartic(const std::vector<PixelRay> &corr, int image_width, int image_height);

/// Coefficients (a, b, c) of a s^2 + b s + c with s = 1/f^2.
Eigen::Vector3d focal_quartic_coefficients(const std::vector<PixelRay> &corr, int image_width, int image_height);

enum class PairStrategy { automatic, all_pairs, random_partners, star };

struct AngleRefineConfig {
    RefinementConfig lm{100, 1e-14, 1e-12, 1e-3, 1e-3, Loss::cauchy};
    bool hold_skew = false;
    PairStrategy strategy = PairStrategy::automatic;
    std::size_t all_pairs_limit = 120;
    int random_partners = 30;
    std::uint64_t seed = 1;
};

std::vector<std::pair<std::size_t, std::size_t>> select_pairs(std::size_t n, const AngleRefineConfig &config);

/// Cosine of the angle between the back-projected calibration pixels (no distortion)
/// minus the database cosine, one residual per pair.
Eigen::VectorXd angle_residuals(const std::vector<PixelRay> &corr,
                                const std::vector<std::pair<std::size_t, std::size_t>> &pairs,
                                const CameraIntrinsics &K);
Eigen::MatrixXd angle_jacobian(const std::vector<PixelRay> &corr,
                               const std::vector<std::pair<std::size_t, std::size_t>> &pairs,
                               const CameraIntrinsics &K);

struct AngleRefineResult {
    CameraIntrinsics intrinsics;
    ResidualReport report;
};

AngleRefineResult refine_intrinsics_angle(const std::vector<PixelRay> &corr, const CameraIntrinsics &K0,
                                          const AngleRefineConfig &config = {});

/// Rotation R minimizing sum |R db_i - calib_i|^2 over centered ray sets.
Rotation estimate_rotation_kabsch(const std::vector<Eigen::Vector3d> &calibration_rays,
                                  const std::vector<Eigen::Vector3d> &database_rays);

struct SingleImageConfig {
    int image_width = 1080;
    int image_height = 960;
    AngleRefineConfig angle;
    RefinementConfig ba;
    bool refine = true; // false: stop after rotation estimation, zero distortion
};

struct SingleImageResult {
    CameraIntrinsics intrinsics;
    Distortion distortion;
    Rotation rotation; // R_c'c: database (reference) rays -> calibration camera
    ResidualReport report;
    double initial_focal = 0.0;
    CameraIntrinsics angle_intrinsics;
    std::size_t matched = 0;
    std::size_t dropped = 0; // observations whose id is not in the database
};

/// Quartic init -> angle refinement -> Kabsch -> joint refinement. Errors are rethrown
/// with the failing stage prefixed to the message.
SingleImageResult calibrate_single_image(const ImageObservations &calibration, const RayDatabase &database,
                                         const SingleImageConfig &config = {});

} // namespace collimcal
