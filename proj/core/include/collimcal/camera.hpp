#pragma once

#include "collimcal/rotation.hpp"

#include <Eigen/Core>

namespace collimcal {

/// Pinhole intrinsics in pixels:
///     [ fx  gamma  cx ]
/// K = [  0   fy    cy ]
///     [  0    0     1 ]
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double gamma = 0.0;

    /// Throws invalid_input unless fx > 0, fy > 0 and all entries are finite.
    void validate() const;

    Eigen::Matrix3d matrix() const;
    Eigen::Matrix3d inverse() const;
    static CameraIntrinsics from_matrix(const Eigen::Matrix3d &K);

    Eigen::Matrix<double, 5, 1> to_vector() const { return {fx, fy, cx, cy, gamma}; }
    static CameraIntrinsics from_vector(const Eigen::Ref<const Eigen::VectorXd> &v) {
        return {v[0], v[1], v[2], v[3], v[4]};
    }
};

/// Two-coefficient radial distortion applied in normalized image coordinates:
/// x_d = x (1 + d1 r^2 + d2 r^4). Forward (projection-side) model.
struct Distortion {
    double d1 = 0.0;
    double d2 = 0.0;

    bool is_zero() const { return d1 == 0.0 && d2 == 0.0; }
    double factor(double r2) const { return 1.0 + r2 * (d1 + d2 * r2); }

    /// True when r -> r (1 + d1 r^2 + d2 r^4) is strictly increasing on [0, max_radius].
    bool is_monotone_up_to(double max_radius) const;

    /// Validating constructor: checks monotonicity out to the normalized radius of the
    /// farthest image corner as seen through K.
    static Distortion checked(double d1, double d2, const CameraIntrinsics &K, int width, int height);
};

/// Largest normalized (undistorted-model) radius of the four image corners under K.
double max_normalized_radius(const CameraIntrinsics &K, int width, int height);

/// Pixel coordinates of a normalized, already distorted image point.
Eigen::Vector2d apply_intrinsics(const CameraIntrinsics &K, const Eigen::Vector2d &xd);

/// Distort a normalized point.
Eigen::Vector2d distort(const Distortion &d, const Eigen::Vector2d &x);

/// Invert distort() by fixed-point iteration (20 iterations, 1e-12 tolerance).
/// Throws undistortion_diverged.
Eigen::Vector2d undistort(const Distortion &d, const Eigen::Vector2d &xd);

/// Project a point given in the camera frame. Throws point_behind_camera when z <= 0.
Eigen::Vector2d project_camera_point(const CameraIntrinsics &K, const Distortion &d, const Eigen::Vector3d &Pc);

/// Full chain: Pc = R P + t, then pinhole + radial distortion.
Eigen::Vector2d project(const CameraIntrinsics &K, const Distortion &d, const Rotation &R, const Eigen::Vector3d &t,
                        const Eigen::Vector3d &P);

/// Unit direction of the ray whose projection is p.
Eigen::Vector3d back_project(const CameraIntrinsics &K, const Distortion &d, const Eigen::Vector2d &p);

/// Derivatives of a projected pixel with respect to the camera-frame point,
/// the five intrinsics (fx, fy, cx, cy, gamma) and the two distortion terms.
struct ProjectionJacobian {
    Eigen::Vector2d pixel;
    Eigen::Matrix<double, 2, 3> d_point;
    Eigen::Matrix<double, 2, 5> d_intrinsics;
    Eigen::Matrix<double, 2, 2> d_distortion;
};

ProjectionJacobian project_with_jacobian(const CameraIntrinsics &K, const Distortion &d, const Eigen::Vector3d &Pc);

} // namespace collimcal
