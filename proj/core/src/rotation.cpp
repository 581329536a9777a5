#include "collimcal/rotation.hpp"

#include "collimcal/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace collimcal {

namespace {
constexpr double kOrthoTol = 1e-12;
}

Rotation::Rotation(const Eigen::Matrix3d &R) : R_(R) {
    if (!R.allFinite()) fail(ErrorCode::invalid_input, "rotation has non-finite entries");
    const Eigen::Matrix3d err = R.transpose() * R - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > kOrthoTol || std::abs(R.determinant() - 1.0) > kOrthoTol)
        fail(ErrorCode::invalid_input, "matrix is not a proper rotation");
}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d &omega) { return nearest(so3_exp(omega)); }

Rotation Rotation::nearest(const Eigen::Matrix3d &M) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d U = svd.matrixU();
    const Eigen::Matrix3d &V = svd.matrixV();
    if ((U * V.transpose()).determinant() < 0) U.col(2) *= -1.0;
    return Rotation(U * V.transpose(), Unchecked{});
}

Eigen::Vector3d Rotation::axis_angle() const { return so3_log(R_); }

Rotation Rotation::transpose() const { return Rotation(R_.transpose(), Unchecked{}); }

Rotation Rotation::operator*(const Rotation &other) const { return nearest(R_ * other.R_); }

Rotation Rotation::boxplus(const Eigen::Vector3d &delta) const { return nearest(R_ * so3_exp(delta)); }

Eigen::Matrix3d skew(const Eigen::Vector3d &v) {
    Eigen::Matrix3d S;
    S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return S;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d &omega) {
    const double theta2 = omega.squaredNorm();
    const Eigen::Matrix3d W = skew(omega);
    if (theta2 < 1e-12) {
        // Taylor expansion keeps second-order accuracy near zero.
        return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
    }
    const double theta = std::sqrt(theta2);
    return Eigen::Matrix3d::Identity() + (std::sin(theta) / theta) * W + ((1.0 - std::cos(theta)) / theta2) * W * W;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d &R) {
    // Quaternion route stays well conditioned near both 0 and pi.
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0) q.coeffs() *= -1.0;
    const Eigen::Vector3d v = q.vec();
    const double s = v.norm();
    if (s < 1e-12) return 2.0 * v;
    const double theta = 2.0 * std::atan2(s, q.w());
    return (theta / s) * v;
}

double rotation_distance(const Rotation &a, const Rotation &b) {
    return so3_log(a.matrix().transpose() * b.matrix()).norm();
}

double angular_distance(const Eigen::Vector3d &v1, const Eigen::Vector3d &v2) {
    const double n1 = v1.norm();
    const double n2 = v2.norm();
    if (!(n1 > 0.0) || !(n2 > 0.0)) fail(ErrorCode::zero_vector, "angular distance of a zero vector");
    const Eigen::Vector3d a = v1 / n1;
    const Eigen::Vector3d b = v2 / n2;
    // atan2 form equals arccos(clamp(a.b)) but keeps full precision near 0 and pi.
    return std::atan2(a.cross(b).norm(), std::clamp(a.dot(b), -1.0, 1.0));
}

} // namespace collimcal
