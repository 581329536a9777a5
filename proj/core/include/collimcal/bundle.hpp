#pragma once

#include "collimcal/camera.hpp"
#include "collimcal/homography.hpp"
#include "collimcal/lm.hpp"
#include "collimcal/multi_solver.hpp"
#include "collimcal/observations.hpp"
#include "collimcal/rotation.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace collimcal {

// Parameter layouts (rotations stored as axis-angle, updated by right increments):
//   spherical:    [fx fy cx cy gamma d1 d2 | t_cp(3) | omega_i(3) ...]   10 + 3N
//   single image: [fx fy cx cy gamma d1 d2 | omega(3)]                    10
//   planar:       [fx fy cx cy gamma d1 d2 | (omega_i(3), t_i(3)) ...]     7 + 6N

struct SphericalState {
    CameraIntrinsics intrinsics;
    Distortion distortion;
    SphericalExtrinsics extrinsics;
};

struct SphericalBAOptions {
    bool fix_skew = false;
    bool fix_center = false;
    bool fix_distortion = false;
};

struct SphericalBAResult {
    SphericalState state;
    ResidualReport report;
};

Eigen::VectorXd pack_spherical(const SphericalState &state);
SphericalState unpack_spherical(const Eigen::VectorXd &params);

/// Stacked (u, v) reprojection errors, image-major in observation order.
Eigen::VectorXd spherical_residuals(const ObservationSet &obs, const Eigen::VectorXd &params);
Eigen::MatrixXd spherical_jacobian(const ObservationSet &obs, const Eigen::VectorXd &params);
Eigen::VectorXd spherical_plus(const Eigen::VectorXd &params, const Eigen::VectorXd &delta);

SphericalBAResult spherical_ba(const ObservationSet &obs, const SphericalState &init,
                               const RefinementConfig &config = {}, const SphericalBAOptions &options = {});

/// (reference ray, observed calibration pixel)
using RayCorrespondence = std::pair<Eigen::Vector3d, Eigen::Vector2d>;

struct SingleImageState {
    CameraIntrinsics intrinsics;
    Distortion distortion;
    Rotation rotation; // reference camera -> calibration camera
};

struct SingleImageBAResult {
    SingleImageState state;
    ResidualReport report;
};

Eigen::VectorXd pack_single(const SingleImageState &state);
SingleImageState unpack_single(const Eigen::VectorXd &params);
Eigen::VectorXd single_residuals(const std::vector<RayCorrespondence> &corr, const Eigen::VectorXd &params);
Eigen::MatrixXd single_jacobian(const std::vector<RayCorrespondence> &corr, const Eigen::VectorXd &params);
Eigen::VectorXd single_plus(const Eigen::VectorXd &params, const Eigen::VectorXd &delta);

/// Requires >= 8 correspondences.
SingleImageBAResult single_image_ba(const std::vector<RayCorrespondence> &corr, const SingleImageState &init,
                                    const RefinementConfig &config = {});

struct PlanarState {
    CameraIntrinsics intrinsics;
    Distortion distortion;
    std::vector<Rotation> rotations;
    std::vector<Eigen::Vector3d> translations;
};

struct PlanarBAResult {
    PlanarState state;
    ResidualReport report;
};

Eigen::VectorXd pack_planar(const PlanarState &state);
PlanarState unpack_planar(const Eigen::VectorXd &params);
Eigen::VectorXd planar_residuals(const ObservationSet &obs, const Eigen::VectorXd &params);
Eigen::MatrixXd planar_jacobian(const ObservationSet &obs, const Eigen::VectorXd &params);
Eigen::VectorXd planar_plus(const Eigen::VectorXd &params, const Eigen::VectorXd &delta);

/// Unconstrained 6-DOF-per-image refinement used after the plane-based baseline.
PlanarBAResult planar_ba(const ObservationSet &obs, const PlanarState &init, const RefinementConfig &config = {});

} // namespace collimcal
