#include "collimcal/homography.hpp"

#include "collimcal/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>

namespace collimcal {

namespace {
constexpr double kRankTolerance = 1e-10;
constexpr double kDesignRankTolerance = 1e-12;
} // namespace

Eigen::Matrix3d normalize_homography_scale(const Eigen::Matrix3d &H) {
    const double n = H.norm();
    if (!(n > 0.0) || !H.allFinite()) fail(ErrorCode::singular_homography, "homography is zero or non-finite");
    Eigen::Matrix3d out = H * (std::sqrt(3.0) / n);
    if (out(2, 2) < 0.0) out = -out;
    return out;
}

Homography::Homography(const Eigen::Matrix3d &H) : H_(normalize_homography_scale(H)) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H_);
    const auto &s = svd.singularValues();
    if (!(s(2) > kRankTolerance * s(0))) fail(ErrorCode::singular_homography, "homography is rank deficient");
}

Eigen::Vector2d Homography::map(const Eigen::Vector2d &xy) const {
    const Eigen::Vector3d p = H_ * xy.homogeneous();
    return p.hnormalized();
}

Eigen::Matrix3d isotropic_normalization(const std::vector<Eigen::Vector2d> &points) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto &p : points) mean += p;
    mean /= static_cast<double>(points.size());
    double dist = 0.0;
    for (const auto &p : points) dist += (p - mean).norm();
    dist /= static_cast<double>(points.size());
    if (!(dist > 0.0)) fail(ErrorCode::degenerate_configuration, "all points coincide");
    const double s = std::sqrt(2.0) / dist;
    Eigen::Matrix3d T;
    T << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
    return T;
}

Homography estimate_homography(const std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> &correspondences) {
    const std::size_t n = correspondences.size();
    if (n < 4) fail(ErrorCode::insufficient_points, "homography needs at least 4 correspondences");

    std::vector<Eigen::Vector2d> src, dst;
    src.reserve(n);
    dst.reserve(n);
    for (const auto &[s, d] : correspondences) {
        src.push_back(s);
        dst.push_back(d);
    }
    const Eigen::Matrix3d Ts = isotropic_normalization(src);
    const Eigen::Matrix3d Td = isotropic_normalization(dst);

    Eigen::MatrixXd A(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d X = Ts * src[i].homogeneous();
        const Eigen::Vector3d x = Td * dst[i].homogeneous();
        const double u = x.x() / x.z();
        const double v = x.y() / x.z();
        A.row(2 * i) << 0.0, 0.0, 0.0, -X.transpose(), v * X.transpose();
        A.row(2 * i + 1) << X.transpose(), 0.0, 0.0, 0.0, -u * X.transpose();
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto &s = svd.singularValues();
    // A generic configuration has a one-dimensional null space; a second small
    // singular value means the minimal subsets are degenerate.
    if (!(s(7) > kDesignRankTolerance * s(0)))
        fail(ErrorCode::degenerate_configuration, "homography design matrix is rank deficient");

    const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
    Eigen::Matrix3d Hn;
    Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    return Homography(Td.inverse() * Hn * Ts);
}

HomographyPose decompose_homography(const Homography &H, const CameraIntrinsics &K) {
    K.validate();
    const Eigen::Matrix3d M = K.inverse() * H.matrix();
    double lambda = 0.5 * (M.col(0).norm() + M.col(1).norm());
    Eigen::Vector3d r1 = M.col(0) / lambda;
    Eigen::Vector3d r2 = M.col(1) / lambda;
    Eigen::Vector3d t = M.col(2) / lambda;
    if (t.z() < 0.0) {
        lambda = -lambda;
        r1 = -r1;
        r2 = -r2;
        t = -t;
    }
    Eigen::Matrix3d R;
    R.col(0) = r1;
    R.col(1) = r2;
    R.col(2) = r1.cross(r2);
    return {Rotation::nearest(R), t, lambda};
}

} // namespace collimcal
