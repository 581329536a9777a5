#include "collimcal/camera.hpp"

#include "collimcal/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>

namespace collimcal {

namespace {
constexpr int kUndistortMaxIterations = 20;
constexpr double kUndistortTolerance = 1e-12;
} // namespace

void CameraIntrinsics::validate() const {
    if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(gamma))
        fail(ErrorCode::invalid_input, "intrinsics contain non-finite values");
    if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::invalid_input, "focal lengths must be positive");
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
    Eigen::Matrix3d K;
    K << fx, gamma, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return K;
}

Eigen::Matrix3d CameraIntrinsics::inverse() const {
    Eigen::Matrix3d Ki;
    Ki << 1.0 / fx, -gamma / (fx * fy), (gamma * cy - cx * fy) / (fx * fy), 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return Ki;
}

CameraIntrinsics CameraIntrinsics::from_matrix(const Eigen::Matrix3d &K) {
    const Eigen::Matrix3d Kn = K / K(2, 2);
    return {Kn(0, 0), Kn(1, 1), Kn(0, 2), Kn(1, 2), Kn(0, 1)};
}

bool Distortion::is_monotone_up_to(double max_radius) const {
    if (!std::isfinite(d1) || !std::isfinite(d2)) return false;
    // d/dr [r f(r^2)] = 1 + 3 d1 r^2 + 5 d2 r^4, sampled densely over the working radius.
    constexpr int kSamples = 2048;
    for (int i = 0; i <= kSamples; ++i) {
        const double r = max_radius * static_cast<double>(i) / kSamples;
        const double r2 = r * r;
        if (!(1.0 + 3.0 * d1 * r2 + 5.0 * d2 * r2 * r2 > 0.0)) return false;
    }
    return true;
}

double max_normalized_radius(const CameraIntrinsics &K, int width, int height) {
    const Eigen::Matrix3d Ki = K.inverse();
    const std::array<Eigen::Vector3d, 4> corners = {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(width, 0, 1),
                                                    Eigen::Vector3d(0, height, 1), Eigen::Vector3d(width, height, 1)};
    double rmax = 0.0;
    for (const auto &c : corners) rmax = std::max(rmax, (Ki * c).head<2>().norm());
    return rmax;
}

Distortion Distortion::checked(double d1, double d2, const CameraIntrinsics &K, int width, int height) {
    Distortion d{d1, d2};
    // The corner radius is measured in distorted coordinates; for the distortion levels
    // we accept this bounds the undistorted radius closely enough.
    if (!d.is_monotone_up_to(max_normalized_radius(K, width, height)))
        fail(ErrorCode::invalid_input, "distortion is not monotone over the image diagonal");
    return d;
}

Eigen::Vector2d apply_intrinsics(const CameraIntrinsics &K, const Eigen::Vector2d &xd) {
    return {K.fx * xd.x() + K.gamma * xd.y() + K.cx, K.fy * xd.y() + K.cy};
}

Eigen::Vector2d distort(const Distortion &d, const Eigen::Vector2d &x) { return x * d.factor(x.squaredNorm()); }

Eigen::Vector2d undistort(const Distortion &d, const Eigen::Vector2d &xd) {
    if (d.is_zero()) return xd;
    Eigen::Vector2d x = xd;
    for (int it = 0; it < kUndistortMaxIterations; ++it) {
        const Eigen::Vector2d next = xd / d.factor(x.squaredNorm());
        if (!next.allFinite()) break;
        if ((next - x).norm() < kUndistortTolerance) return next;
        x = next;
    }
    fail(ErrorCode::undistortion_diverged, "radial undistortion did not converge");
}

Eigen::Vector2d project_camera_point(const CameraIntrinsics &K, const Distortion &d, const Eigen::Vector3d &Pc) {
    if (!(Pc.z() > 0.0)) fail(ErrorCode::point_behind_camera, "camera-frame depth is not positive");
    const Eigen::Vector2d x(Pc.x() / Pc.z(), Pc.y() / Pc.z());
    return apply_intrinsics(K, distort(d, x));
}

Eigen::Vector2d project(const CameraIntrinsics &K, const Distortion &d, const Rotation &R, const Eigen::Vector3d &t,
                        const Eigen::Vector3d &P) {
    return project_camera_point(K, d, R * P + t);
}

Eigen::Vector3d back_project(const CameraIntrinsics &K, const Distortion &d, const Eigen::Vector2d &p) {
    const double yd = (p.y() - K.cy) / K.fy;
    const double xd = (p.x() - K.cx - K.gamma * yd) / K.fx;
    const Eigen::Vector2d x = undistort(d, {xd, yd});
    return Eigen::Vector3d(x.x(), x.y(), 1.0).normalized();
}

ProjectionJacobian project_with_jacobian(const CameraIntrinsics &K, const Distortion &d, const Eigen::Vector3d &Pc) {
    if (!(Pc.z() > 0.0)) fail(ErrorCode::point_behind_camera, "camera-frame depth is not positive");
    const double iz = 1.0 / Pc.z();
    const double x = Pc.x() * iz;
    const double y = Pc.y() * iz;
    const double r2 = x * x + y * y;
    const double f = d.factor(r2);
    const double g = 2.0 * (d.d1 + 2.0 * d.d2 * r2); // d f / d(r2) times 2
    const double xd = x * f;
    const double yd = y * f;

    ProjectionJacobian J;
    J.pixel = {K.fx * xd + K.gamma * yd + K.cx, K.fy * yd + K.cy};

    Eigen::Matrix2d d_dist_d_norm;
    d_dist_d_norm << f + g * x * x, g * x * y, g * x * y, f + g * y * y;
    Eigen::Matrix<double, 2, 3> d_norm_d_point;
    d_norm_d_point << iz, 0.0, -x * iz, 0.0, iz, -y * iz;
    Eigen::Matrix2d d_pix_d_dist;
    d_pix_d_dist << K.fx, K.gamma, 0.0, K.fy;

    J.d_point = d_pix_d_dist * d_dist_d_norm * d_norm_d_point;

    J.d_intrinsics << xd, 0.0, 1.0, 0.0, yd, //
        0.0, yd, 0.0, 1.0, 0.0;

    Eigen::Matrix2d d_dist_d_coeff;
    d_dist_d_coeff << x * r2, x * r2 * r2, y * r2, y * r2 * r2;
    J.d_distortion = d_pix_d_dist * d_dist_d_coeff;
    return J;
}

} // namespace collimcal
