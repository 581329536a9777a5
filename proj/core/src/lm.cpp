#include "collimcal/lm.hpp"

#include "collimcal/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <limits>

namespace collimcal {

namespace {

constexpr double kMaxDamping = 1e32;

// Weight sqrt(rho'(s)) applied to a block's residual and Jacobian rows.
double block_weight(double s, const RefinementConfig &config) {
    if (config.loss == Loss::squared) return 1.0;
    const double c2 = config.cauchy_scale * config.cauchy_scale;
    return std::sqrt(1.0 / (1.0 + s / c2));
}

void check_dimensions(const Eigen::VectorXd &r, int block_size) {
    if (block_size < 1 || r.size() % block_size != 0)
        fail(ErrorCode::invalid_input, "residual length is not a multiple of the block size");
}

} // namespace

void RefinementConfig::validate() const {
    if (max_iterations <= 0 || !(gradient_tolerance > 0.0) || !(parameter_tolerance > 0.0) || !(cauchy_scale > 0.0) ||
        !(initial_damping > 0.0))
        fail(ErrorCode::invalid_input, "refinement settings must be positive");
}

double robust_cost(const Eigen::VectorXd &residuals, int block_size, const RefinementConfig &config) {
    check_dimensions(residuals, block_size);
    const double c2 = config.cauchy_scale * config.cauchy_scale;
    double cost = 0.0;
    for (Eigen::Index b = 0; b < residuals.size(); b += block_size) {
        const double s = residuals.segment(b, block_size).squaredNorm();
        cost += config.loss == Loss::squared ? s : c2 * std::log1p(s / c2);
    }
    return 0.5 * cost;
}

LmResult lm_minimize(const LeastSquaresProblem &problem, const Eigen::VectorXd &x0, const RefinementConfig &config) {
    config.validate();
    const Eigen::Index n = x0.size();
    if (!problem.fixed.empty() && static_cast<Eigen::Index>(problem.fixed.size()) != n)
        fail(ErrorCode::invalid_input, "fixed mask length does not match the parameter count");

    std::vector<Eigen::Index> free_index;
    for (Eigen::Index k = 0; k < n; ++k)
        if (problem.fixed.empty() || !problem.fixed[static_cast<std::size_t>(k)]) free_index.push_back(k);
    const auto m = static_cast<Eigen::Index>(free_index.size());

    auto plus = [&](const Eigen::VectorXd &x, const Eigen::VectorXd &delta) -> Eigen::VectorXd {
        return problem.plus ? problem.plus(x, delta) : Eigen::VectorXd(x + delta);
    };

    LmResult out;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd r = problem.residual(x);
    check_dimensions(r, problem.block_size);
    double cost = robust_cost(r, problem.block_size, config);
    out.report.cost_trajectory.push_back(cost);
    double mu = config.initial_damping;

    for (int iter = 0;; ++iter) {
        if (iter >= config.max_iterations) {
            out.report.termination = "iteration budget exhausted";
            break;
        }
        const Eigen::MatrixXd J = problem.jacobian(x);
        if (J.rows() != r.size() || J.cols() != n)
            fail(ErrorCode::invalid_input, "Jacobian dimensions do not match residual and parameters");

        Eigen::MatrixXd Jw(J.rows(), m);
        Eigen::VectorXd rw = r;
        for (Eigen::Index j = 0; j < m; ++j) Jw.col(j) = J.col(free_index[static_cast<std::size_t>(j)]);
        for (Eigen::Index b = 0; b < r.size(); b += problem.block_size) {
            const double w = block_weight(r.segment(b, problem.block_size).squaredNorm(), config);
            rw.segment(b, problem.block_size) *= w;
            Jw.middleRows(b, problem.block_size) *= w;
        }
        const Eigen::VectorXd g = Jw.transpose() * rw;
        if (m == 0 || g.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) {
            out.report.converged = true;
            out.report.termination = "gradient tolerance";
            break;
        }
        // Bundle Jacobians are mostly zero; the sparse product keeps J^T J cheap.
        const Eigen::SparseMatrix<double> Js = Jw.sparseView();
        const Eigen::MatrixXd A = Eigen::MatrixXd(Eigen::SparseMatrix<double>(Js.transpose() * Js));
        Eigen::VectorXd diag = A.diagonal();
        const double diag_floor = std::max(1e-12 * diag.maxCoeff(), std::numeric_limits<double>::min());
        diag = diag.cwiseMax(diag_floor);

        out.report.iterations_used = iter + 1;
        bool accepted = false;
        bool step_small = false;
        while (!accepted) {
            Eigen::MatrixXd Ad = A;
            Ad.diagonal() += mu * diag;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Ad);
            Eigen::VectorXd step;
            if (ldlt.info() == Eigen::Success) step = ldlt.solve(-g);
            if (ldlt.info() != Eigen::Success || !step.allFinite()) {
                mu *= 10.0;
                if (mu > kMaxDamping) fail(ErrorCode::solve_failure, "damped normal equations cannot be solved");
                continue;
            }
            Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
            Eigen::VectorXd x_free(m);
            for (Eigen::Index j = 0; j < m; ++j) {
                delta[free_index[static_cast<std::size_t>(j)]] = step[j];
                x_free[j] = x[free_index[static_cast<std::size_t>(j)]];
            }
            if (step.norm() <= config.parameter_tolerance * (x_free.norm() + config.parameter_tolerance)) {
                step_small = true;
                break;
            }

            double new_cost = std::numeric_limits<double>::infinity();
            Eigen::VectorXd x_new;
            Eigen::VectorXd r_new;
            try {
                x_new = plus(x, delta);
                r_new = problem.residual(x_new);
                new_cost = robust_cost(r_new, problem.block_size, config);
            } catch (const CalibrationError &) {
                // e.g. a trial point behind the camera: treat as a rejected step
            }
            if (std::isfinite(new_cost) && new_cost < cost) {
                x = std::move(x_new);
                r = std::move(r_new);
                cost = new_cost;
                out.report.cost_trajectory.push_back(cost);
                mu = std::max(mu / 10.0, 1e-15);
                accepted = true;
            } else {
                mu *= 10.0;
                if (mu > kMaxDamping) {
                    step_small = true;
                    break;
                }
            }
        }
        if (step_small) {
            out.report.converged = true;
            out.report.termination = "parameter tolerance";
            break;
        }
    }

    out.parameters = x;
    const double s2 = r.squaredNorm();
    out.report.rms_reprojection = r.size() > 0 ? std::sqrt(s2 / static_cast<double>(r.size())) : 0.0;
    return out;
}

} // namespace collimcal
