#pragma once

#include "collimcal/camera.hpp"
#include "collimcal/rotation.hpp"
#include "collimcal/synth.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <vector>

namespace collimcal::testing {

inline double rel_err(double value, double truth) { return std::abs(value - truth) / std::abs(truth); }

/// Largest relative error over fx, fy and absolute error (scaled by fx) over cx, cy, gamma.
inline double intrinsics_rel_err(const CameraIntrinsics &K, const CameraIntrinsics &T) {
    double e = std::max(rel_err(K.fx, T.fx), rel_err(K.fy, T.fy));
    e = std::max(e, std::abs(K.cx - T.cx) / T.fx);
    e = std::max(e, std::abs(K.cy - T.cy) / T.fy);
    return std::max(e, std::abs(K.gamma - T.gamma) / T.fx);
}

/// Default synthetic setup with zero distortion and the given pixel noise.
inline SyntheticConfig undistorted_config(double pixel_sigma = 0.0, int images = 15) {
    SyntheticConfig c;
    c.distortion = {};
    c.pixel_noise_sigma = pixel_sigma;
    c.image_count = images;
    return c;
}

inline Rotation rot_z(double angle) { return Rotation::from_axis_angle(Eigen::Vector3d(0.0, 0.0, angle)); }

/// Same spherical pose with the target turned about its normal through (x, y).
inline SphericalPose z_rotated(const SphericalPose &p, double angle) { return {p.R_pc * rot_z(angle), p.t_cp}; }

/// Central differences of f along plus(x, h e_k).
inline Eigen::MatrixXd central_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd &)> &f,
                                          const std::function<Eigen::VectorXd(const Eigen::VectorXd &,
                                                                              const Eigen::VectorXd &)> &plus,
                                          const Eigen::VectorXd &x, Eigen::Index local_dim, double h) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd J(f0.size(), local_dim);
    for (Eigen::Index k = 0; k < local_dim; ++k) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(local_dim);
        d[k] = h;
        J.col(k) = (f(plus(x, d)) - f(plus(x, -d))) / (2.0 * h);
    }
    return J;
}

/// Relative discrepancy max|A - B| / max(max|B|, 1e-12) computed column by column.
inline double max_rel_discrepancy(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < A.cols(); ++k) {
        const double scale = std::max(B.col(k).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, B.cwiseAbs().maxCoeff()));
        worst = std::max(worst, (A.col(k) - B.col(k)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

// Three mutually orthogonal target points at depth r used to argue that only a zero
// translation preserves all pairwise angles.
struct OrthogonalTriple {
    Eigen::Vector3d A, B, C;
    explicit OrthogonalTriple(double r)
        : A(std::sqrt(2.0) * r, 0.0, r), B(-std::sqrt(2.0) / 2.0 * r, std::sqrt(6.0) / 2.0 * r, r),
          C(-std::sqrt(2.0) / 2.0 * r, -std::sqrt(6.0) / 2.0 * r, r) {}
};

/// Cosines of the three pairwise angles after translating all points by t.
inline Eigen::Vector3d triple_cosines(const OrthogonalTriple &p, const Eigen::Vector3d &t) {
    auto c = [](const Eigen::Vector3d &u, const Eigen::Vector3d &v) { return u.dot(v) / (u.norm() * v.norm()); };
    return {c(p.A + t, p.B + t), c(p.A + t, p.C + t), c(p.B + t, p.C + t)};
}

/// Dense grid over [-3r, 3r]^3 followed by Gauss-Newton from every grid cell that is a
/// local minimum of the cosine residual. Returns the distinct roots found.
std::vector<Eigen::Vector3d> orthogonal_triple_roots(double r, int grid = 41);

} // namespace collimcal::testing
