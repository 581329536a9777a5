#pragma once

#include "collimcal/camera.hpp"
#include "collimcal/homography.hpp"
#include "collimcal/observations.hpp"
#include "collimcal/rotation.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace collimcal {

/// Camera optical center fixed in the target frame, t_cp = (x, y, -r), plus the
/// per-image target-to-camera rotations R_pc.
struct SphericalExtrinsics {
    double x = 0.0; // mm
    double y = 0.0; // mm
    double r = 1.0; // mm, > 0
    std::vector<Rotation> rotations;

    Eigen::Vector3d t_cp() const { return {x, y, -r}; }
    /// Camera-frame translation of image i: t = -R_i t_cp.
    Eigen::Vector3d translation(std::size_t i) const { return -(rotations.at(i) * t_cp()); }
    void validate() const;
};

struct SphericalSolution {
    CameraIntrinsics intrinsics;
    SphericalExtrinsics extrinsics;
};

/// Image of the absolute conic Q = K^-T K^-1 as q = (Q11, Q12, Q13, Q22, Q23, Q33).
struct IacVector {
    Eigen::Matrix<double, 6, 1> q = Eigen::Matrix<double, 6, 1>::Zero();

    Eigen::Matrix3d matrix() const;
    static IacVector from_intrinsics(const CameraIntrinsics &K);
};

/// Stacked spherical-motion constraints D [w; a] = b, six rows per image.
struct LinearSystem {
    static constexpr int kRowsPerImage = 6;
    static constexpr int kColumns = 11;

    Eigen::MatrixXd D;
    Eigen::VectorXd b;
    std::vector<double> scale_ratios; // lambda_i / lambda_base
    std::size_t base_index = 0;
};

/// Pixel and target-plane similarities applied to every homography before solving:
/// H' = pixel * H * world^-1.
struct Conditioning {
    Eigen::Matrix3d pixel = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d world = Eigen::Matrix3d::Identity();

    static Conditioning from_observations(const ObservationSet &obs);
    Homography apply(const Homography &H) const;
};

/// Real cube root of det(H_base^-1 H_i), i.e. lambda_i / lambda_base.
double scale_ratio(const Homography &H_i, const Homography &H_base);
/// Same on raw matrices, where the overall scale of each matrix is kept.
double scale_ratio(const Eigen::Matrix3d &H_i, const Eigen::Matrix3d &H_base);

/// Requires at least 3 images.
LinearSystem build_linear_system(const std::vector<Homography> &homographies, std::size_t base_index);

/// Same rows without the image-count precondition (rank diagnostics on 1 or 2 images).
LinearSystem assemble_constraint_rows(const std::vector<Homography> &homographies, std::size_t base_index);

/// Number of singular values of the column-equilibrated matrix above tolerance * sigma_max.
int numerical_rank(const Eigen::MatrixXd &D, double tolerance = 1e-8);

/// Singular values of D after scaling every column to unit norm.
Eigen::VectorXd equilibrated_singular_values(const Eigen::MatrixXd &D);

struct ClosedFormOptions {
    /// Defaults to the image with the most observed points.
    std::optional<std::size_t> base_index;
    /// sigma_min / sigma_max of the column-equilibrated D below this is rank deficiency.
    double rank_tolerance = 1e-8;
};

/// N >= 3 image closed-form solver under the spherical motion constraint.
SphericalSolution solve_closed_form(const ObservationSet &observations, const ClosedFormOptions &options = {});

/// Same solver starting from already estimated homographies (target mm -> px).
SphericalSolution solve_closed_form(const std::vector<Homography> &homographies, std::size_t base_index,
                                    const Conditioning &conditioning = {}, double rank_tolerance = 1e-8);

struct MinimalCandidate {
    SphericalSolution solution;
    double hidden_variable = 0.0; // c = x + y - |t_cp|^2, conditioned units
    double residual = 0.0;        // summed squared residual of all ten constraints
};

/// Two-image minimal solver (hidden variable on c). Candidates ordered by residual.
std::vector<MinimalCandidate> solve_minimal(const ObservationSet &observation_pair);

/// Coefficients (alpha, beta, gamma) of det C(c) = alpha c^2 + beta c + gamma for two
/// conditioned homographies, plus the 6x6 matrices with C(c) = C0 + c C1.
struct HiddenVariableSystem {
    Eigen::Matrix<double, 6, 6> C0;
    Eigen::Matrix<double, 6, 6> C1;
    Eigen::Vector3d determinant_coefficients;
};
HiddenVariableSystem build_hidden_variable_system(const Homography &H1, const Homography &H2);

/// u_mn such that (H^T Q H)_mn = u_mn . q.
Eigen::Matrix<double, 6, 1> iac_constraint_row(const Eigen::Matrix3d &H, int m, int n);

/// K from the IAC by Cholesky; q is sign-normalized so Q33 > 0. Throws not_positive_definite.
CameraIntrinsics decompose_iac(const IacVector &q);

} // namespace collimcal
