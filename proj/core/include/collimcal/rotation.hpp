#pragma once

#include <Eigen/Core>

namespace collimcal {

/// Element of SO(3). Construction validates orthonormality and det = +1 to 1e-12
/// unless the matrix is explicitly re-orthogonalized first.
class Rotation {
  public:
    Rotation() : R_(Eigen::Matrix3d::Identity()) {}

    /// Throws invalid_input when R is not a proper rotation within 1e-12 per entry.
    explicit Rotation(const Eigen::Matrix3d &R);

    static Rotation identity() { return Rotation(); }
    static Rotation from_axis_angle(const Eigen::Vector3d &omega);
    /// Nearest rotation in the Frobenius sense (SVD projection onto SO(3)).
    static Rotation nearest(const Eigen::Matrix3d &M);

    const Eigen::Matrix3d &matrix() const { return R_; }
    Eigen::Vector3d axis_angle() const;
    Rotation transpose() const;

    Eigen::Vector3d operator*(const Eigen::Vector3d &v) const { return R_ * v; }
    Rotation operator*(const Rotation &other) const;

    /// R * exp(delta), re-orthogonalized.
    Rotation boxplus(const Eigen::Vector3d &delta) const;

  private:
    struct Unchecked {};
    Rotation(const Eigen::Matrix3d &R, Unchecked) : R_(R) {}

    Eigen::Matrix3d R_;
};

Eigen::Matrix3d skew(const Eigen::Vector3d &v);
Eigen::Matrix3d so3_exp(const Eigen::Vector3d &omega);
Eigen::Vector3d so3_log(const Eigen::Matrix3d &R);

/// Geodesic angle between two rotations, radians.
double rotation_distance(const Rotation &a, const Rotation &b);

/// Angle between two nonzero vectors in [0, pi]. Throws zero_vector.
double angular_distance(const Eigen::Vector3d &v1, const Eigen::Vector3d &v2);

} // namespace collimcal
