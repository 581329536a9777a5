#include "collimcal/single_image.hpp"

#include "collimcal/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace collimcal {

namespace {

constexpr std::size_t kMinMatched = 8;

Eigen::Vector3d normalized_ray(const CameraIntrinsics &K, const Eigen::Vector2d &p) {
    return (K.inverse() * p.homogeneous()).normalized();
}

double squared_angle_cost(const std::vector<PixelRay> &corr, double f, const Eigen::Vector2d &center) {
    const CameraIntrinsics K{f, f, center.x(), center.y(), 0.0};
    double e = 0.0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const Eigen::Vector3d ui = normalized_ray(K, corr[i].first);
        for (std::size_t j = i + 1; j < corr.size(); ++j) {
            const double r = ui.dot(normalized_ray(K, corr[j].first)) - corr[i].second.dot(corr[j].second);
            e += r * r;
        }
    }
    return e;
}

template <typename F> auto with_stage(const char *stage, F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const CalibrationError &e) {
        throw e.with_stage(stage);
    }
}

} // namespace

void RayDatabase::validate() const {
    reference_intrinsics.validate();
    for (const auto &[id, ray] : rays)
        if (!ray.allFinite() || std::abs(ray.norm() - 1.0) > 1e-12)
            fail(ErrorCode::invalid_input, "database ray " + std::to_string(id) + " is not unit-norm");
}

RayDatabase build_ray_database(const std::vector<ImagePoint> &reference, const CameraIntrinsics &K,
                               const Distortion &d) {
    if (reference.size() < kMinMatched)
        fail(ErrorCode::insufficient_points, "reference image needs at least 8 points");
    RayDatabase db;
    db.reference_intrinsics = K;
    db.reference_distortion = d;
    for (const auto &p : reference) {
        if (!db.rays.emplace(p.id, back_project(K, d, p.pixel)).second)
            fail(ErrorCode::duplicate_id, "duplicate reference point id " + std::to_string(p.id));
    }
    return db;
}

Eigen::Vector3d focal_quartic_coefficients(const std::vector<PixelRay> &corr, int image_width, int image_height) {
    const Eigen::Vector2d center(0.5 * image_width, 0.5 * image_height);
    Eigen::Vector3d coef = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const Eigen::Vector2d ai = corr[i].first - center;
        for (std::size_t j = i + 1; j < corr.size(); ++j) {
            const Eigen::Vector2d aj = corr[j].first - center;
            const double p = ai.dot(aj);
            const double ni = ai.squaredNorm();
            const double nj = aj.squaredNorm();
            const double cd = corr[i].second.dot(corr[j].second);
            const double cd2 = cd * cd;
            coef[0] += p * p - cd2 * ni * nj;
            coef[1] += 2.0 * p - cd2 * (ni + nj);
            coef[2] += 1.0 - cd2;
        }
    }
    return coef;
}

double init_focal_quartic(const std::vector<PixelRay> &corr, int image_width, int image_height) {
    if (corr.size() < 2) fail(ErrorCode::insufficient_points, "focal initialization needs at least one point pair");
    if (image_width <= 0 || image_height <= 0) fail(ErrorCode::invalid_input, "image size must be positive");
    const Eigen::Vector3d coef = focal_quartic_coefficients(corr, image_width, image_height);
    const double a = coef[0];
    const double b = coef[1];
    const double c = coef[2];

    // Compare terms at a typical scale s ~ 1 / (image size)^2.
    const double s0 = 1.0 / (static_cast<double>(image_width) * image_width + static_cast<double>(image_height) * image_height);
    const double scale = std::max({std::abs(a) * s0 * s0, std::abs(b) * s0, std::abs(c)});
    if (!(scale > 0.0)) fail(ErrorCode::no_positive_root, "point pairs carry no angular information");

    std::vector<double> roots;
    if (std::abs(a) * s0 * s0 <= 1e-14 * scale) {
        if (std::abs(b) > 0.0) roots.push_back(-c / b);
    } else {
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
            const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
            if (q != 0.0) {
                roots.push_back(q / a);
                roots.push_back(c / q);
            } else {
                roots.push_back(0.0);
            }
        }
    }

    const Eigen::Vector2d center(0.5 * image_width, 0.5 * image_height);
    double best_f = 0.0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const double s : roots) {
        if (!(s > 0.0) || !std::isfinite(s)) continue;
        const double f = 1.0 / std::sqrt(s);
        const double cost = squared_angle_cost(corr, f, center);
        if (cost < best_cost) {
            best_cost = cost;
            best_f = f;
        }
    }
    if (!(best_f > 0.0)) fail(ErrorCode::no_positive_root, "focal equation has no positive real root");
    return best_f;
}

std::vector<std::pair<std::size_t, std::size_t>> select_pairs(std::size_t n, const AngleRefineConfig &config) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    PairStrategy strategy = config.strategy;
    if (strategy == PairStrategy::automatic)
        strategy = n <= config.all_pairs_limit ? PairStrategy::all_pairs : PairStrategy::random_partners;

    switch (strategy) {
    case PairStrategy::star:
        for (std::size_t j = 1; j < n; ++j) pairs.emplace_back(0, j);
        break;
    case PairStrategy::random_partners: {
        std::mt19937_64 rng(config.seed);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        if (n < 2) break;
        std::uniform_int_distribution<std::size_t> pick(0, n - 2);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.random_partners, 1)), n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t added = 0;
            for (std::size_t tries = 0; added < k && tries < 20 * k; ++tries) {
                std::size_t j = pick(rng);
                if (j >= i) ++j;
                const auto key = std::minmax(i, j);
                if (seen.insert(key).second) {
                    pairs.push_back(key);
                    ++added;
                }
            }
        }
        break;
    }
    case PairStrategy::all_pairs:
    case PairStrategy::automatic:
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
        break;
    }
    return pairs;
}

Eigen::VectorXd angle_residuals(const std::vector<PixelRay> &corr,
                                const std::vector<std::pair<std::size_t, std::size_t>> &pairs,
                                const CameraIntrinsics &K) {
    std::vector<Eigen::Vector3d> u(corr.size());
    for (std::size_t i = 0; i < corr.size(); ++i) u[i] = normalized_ray(K, corr[i].first);
    Eigen::VectorXd r(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        r[static_cast<Eigen::Index>(k)] = u[i].dot(u[j]) - corr[i].second.dot(corr[j].second);
    }
    return r;
}

Eigen::MatrixXd angle_jacobian(const std::vector<PixelRay> &corr,
                               const std::vector<std::pair<std::size_t, std::size_t>> &pairs,
                               const CameraIntrinsics &K) {
    // m = K^-1 p: m_y = (v - cy) / fy, m_x = (u - cx - gamma m_y) / fx, m_z = 1.
    const std::size_t n = corr.size();
    std::vector<Eigen::Vector3d> m(n);
    std::vector<Eigen::Matrix<double, 3, 5>> dm(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d &p = corr[i].first;
        const double my = (p.y() - K.cy) / K.fy;
        const double mx = (p.x() - K.cx - K.gamma * my) / K.fx;
        m[i] = Eigen::Vector3d(mx, my, 1.0);
        Eigen::Matrix<double, 3, 5> D = Eigen::Matrix<double, 3, 5>::Zero();
        // columns: fx fy cx cy gamma
        D(1, 1) = -my / K.fy;
        D(1, 3) = -1.0 / K.fy;
        D(0, 0) = -mx / K.fx;
        D(0, 1) = K.gamma * my / (K.fx * K.fy);
        D(0, 2) = -1.0 / K.fx;
        D(0, 3) = K.gamma / (K.fx * K.fy);
        D(0, 4) = -my / K.fx;
        dm[i] = D;
    }
    Eigen::MatrixXd J(static_cast<Eigen::Index>(pairs.size()), 5);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        const double ni = m[i].norm();
        const double nj = m[j].norm();
        const Eigen::Vector3d ui = m[i] / ni;
        const Eigen::Vector3d uj = m[j] / nj;
        const double c = ui.dot(uj);
        const Eigen::RowVector3d dci = (uj - c * ui).transpose() / ni;
        const Eigen::RowVector3d dcj = (ui - c * uj).transpose() / nj;
        J.row(static_cast<Eigen::Index>(k)) = dci * dm[i] + dcj * dm[j];
    }
    return J;
}

AngleRefineResult refine_intrinsics_angle(const std::vector<PixelRay> &corr, const CameraIntrinsics &K0,
                                          const AngleRefineConfig &config) {
    K0.validate();
    const auto pairs = select_pairs(corr.size(), config);
    if (pairs.size() < 5) fail(ErrorCode::insufficient_points, "angle refinement needs at least 5 point pairs");

    LeastSquaresProblem problem;
    problem.block_size = 1;
    problem.residual = [&](const Eigen::VectorXd &x) {
        return angle_residuals(corr, pairs, CameraIntrinsics::from_vector(x));
    };
    problem.jacobian = [&](const Eigen::VectorXd &x) {
        return angle_jacobian(corr, pairs, CameraIntrinsics::from_vector(x));
    };
    if (config.hold_skew) problem.fixed = {false, false, false, false, true};

    const LmResult lm = lm_minimize(problem, K0.to_vector(), config.lm);
    AngleRefineResult out{CameraIntrinsics::from_vector(lm.parameters), lm.report};
    out.intrinsics.validate();
    return out;
}

Rotation estimate_rotation_kabsch(const std::vector<Eigen::Vector3d> &calibration_rays,
                                  const std::vector<Eigen::Vector3d> &database_rays) {
    if (calibration_rays.size() != database_rays.size())
        fail(ErrorCode::invalid_input, "ray lists must be index-aligned");
    const std::size_t n = calibration_rays.size();
    if (n < 3) fail(ErrorCode::insufficient_points, "rotation estimation needs at least 3 rays");

    Eigen::Vector3d mean_c = Eigen::Vector3d::Zero();
    Eigen::Vector3d mean_d = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mean_c += calibration_rays[i];
        mean_d += database_rays[i];
    }
    mean_c /= static_cast<double>(n);
    mean_d /= static_cast<double>(n);

    // A = sum qd_i qc_i^T = U S V^T; R = V diag(1, 1, d) U^T maps database rays onto calibration rays.
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < n; ++i) A += (database_rays[i] - mean_d) * (calibration_rays[i] - mean_c).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto &s = svd.singularValues();
    if (!(s(1) > 1e-12 * std::max(s(0), 1e-300)) || !(s(0) > 0.0))
        fail(ErrorCode::degenerate_configuration, "ray covariance has rank below 2");
    const Eigen::Matrix3d &U = svd.matrixU();
    const Eigen::Matrix3d &V = svd.matrixV();
    const double d = (V * U.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return Rotation::nearest(V * Eigen::Vector3d(1.0, 1.0, d).asDiagonal() * U.transpose());
}

SingleImageResult calibrate_single_image(const ImageObservations &calibration, const RayDatabase &database,
                                         const SingleImageConfig &config) {
    SingleImageResult out;
    std::vector<PixelRay> corr;
    for (const auto &p : calibration.points) {
        const auto it = database.rays.find(p.id);
        if (it == database.rays.end()) {
            ++out.dropped;
            continue;
        }
        corr.emplace_back(p.pixel, it->second);
    }
    out.matched = corr.size();
    if (corr.size() < kMinMatched)
        fail(ErrorCode::insufficient_points,
             "only " + std::to_string(corr.size()) + " point ids match the database (need 8)");

    out.initial_focal = with_stage("focal initialization",
                                   [&] { return init_focal_quartic(corr, config.image_width, config.image_height); });
    const CameraIntrinsics K0{out.initial_focal, out.initial_focal, 0.5 * config.image_width,
                              0.5 * config.image_height, 0.0};
    const AngleRefineResult angle =
        with_stage("angle refinement", [&] { return refine_intrinsics_angle(corr, K0, config.angle); });
    out.angle_intrinsics = angle.intrinsics;

    const Rotation R0 = with_stage("rotation estimation", [&] {
        std::vector<Eigen::Vector3d> qc, qd;
        for (const auto &[pixel, ray] : corr) {
            qc.push_back(normalized_ray(angle.intrinsics, pixel));
            qd.push_back(ray);
        }
        return estimate_rotation_kabsch(qc, qd);
    });

    std::vector<RayCorrespondence> ba_corr;
    ba_corr.reserve(corr.size());
    for (const auto &[pixel, ray] : corr) ba_corr.emplace_back(ray, pixel);
    if (!config.refine) {
        const SingleImageState init{angle.intrinsics, Distortion{}, R0};
        const Eigen::VectorXd r = single_residuals(ba_corr, pack_single(init));
        out.intrinsics = init.intrinsics;
        out.rotation = R0;
        out.report.rms_reprojection = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
        out.report.per_image_rms = {out.report.rms_reprojection};
        out.report.converged = true;
        out.report.termination = "not refined";
        return out;
    }
    const SingleImageBAResult ba = with_stage("bundle adjustment", [&] {
        return single_image_ba(ba_corr, SingleImageState{angle.intrinsics, Distortion{}, R0}, config.ba);
    });
    out.intrinsics = ba.state.intrinsics;
    out.distortion = ba.state.distortion;
    out.rotation = ba.state.rotation;
    out.report = ba.report;
    return out;
}

} // namespace collimcal
