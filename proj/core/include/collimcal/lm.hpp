#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace collimcal {

enum class Loss { squared, cauchy };

struct RefinementConfig {
    int max_iterations = 100;
    double gradient_tolerance = 1e-10;
    double parameter_tolerance = 1e-12;
    double cauchy_scale = 2.0; // residual units (pixels for reprojection)
    double initial_damping = 1e-3;
    Loss loss = Loss::cauchy;

    /// Throws invalid_input unless every numeric field is positive.
    void validate() const;
};

struct ResidualReport {
    double rms_reprojection = 0.0; // per coordinate
    std::vector<double> per_image_rms;
    int iterations_used = 0;
    bool converged = false;
    /// Robust cost at the start and after every accepted step.
    std::vector<double> cost_trajectory;
    std::string termination;
};

/// Residuals are grouped in consecutive blocks of block_size entries; the robust loss
/// is applied to the squared norm of each block.
struct LeastSquaresProblem {
    int block_size = 1;
    std::function<Eigen::VectorXd(const Eigen::VectorXd &)> residual;
    /// Derivative with respect to the local increment used by plus().
    std::function<Eigen::MatrixXd(const Eigen::VectorXd &)> jacobian;
    /// x [+] delta; plain addition when empty.
    std::function<Eigen::VectorXd(const Eigen::VectorXd &, const Eigen::VectorXd &)> plus;
    /// Parameters held constant (same length as x), empty means all free.
    std::vector<bool> fixed;
};

struct LmResult {
    Eigen::VectorXd parameters;
    ResidualReport report;
};

/// 0.5 * sum of rho(|r_b|^2) with rho(s) = c^2 log(1 + s / c^2) or rho(s) = s.
double robust_cost(const Eigen::VectorXd &residuals, int block_size, const RefinementConfig &config);

/// Damped normal-equation Levenberg-Marquardt with diagonal (Marquardt) scaling and
/// robust reweighting. Throws solve_failure when the damped system cannot be solved.
LmResult lm_minimize(const LeastSquaresProblem &problem, const Eigen::VectorXd &x0, const RefinementConfig &config);

} // namespace collimcal
