#pragma once

#include "collimcal/camera.hpp"
#include "collimcal/rotation.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace collimcal {

/// Planar homography target(mm) -> image(px), defined up to scale.
/// Stored with Frobenius norm sqrt(3) and h33 > 0.
class Homography {
  public:
    Homography() : H_(Eigen::Matrix3d::Identity()) {}
    /// Normalizes scale/sign; throws singular_homography when rank < 3
    /// (sigma_min / sigma_max <= 1e-10).
    explicit Homography(const Eigen::Matrix3d &H);

    const Eigen::Matrix3d &matrix() const { return H_; }
    Eigen::Vector2d map(const Eigen::Vector2d &xy) const;

  private:
    Eigen::Matrix3d H_;
};

/// Scale/sign convention shared by every homography consumer.
Eigen::Matrix3d normalize_homography_scale(const Eigen::Matrix3d &H);

/// Normalized DLT over (target XY mm, pixel) pairs.
Homography estimate_homography(const std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> &correspondences);

struct HomographyPose {
    Rotation R;
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    double lambda = 1.0;
};

/// H = lambda K [r1 r2 t]; target forced in front of the camera (t.z > 0).
HomographyPose decompose_homography(const Homography &H, const CameraIntrinsics &K);

/// Similarity used to condition 2D point sets: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d isotropic_normalization(const std::vector<Eigen::Vector2d> &points);

} // namespace collimcal
