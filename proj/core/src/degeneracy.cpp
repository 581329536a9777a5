#include "collimcal/degeneracy.hpp"

#include "collimcal/error.hpp"
#include "collimcal/homography.hpp"
#include "collimcal/multi_solver.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace collimcal {

namespace {

double max_common_pixel_delta(const ImageObservations &a, const ImageObservations &b, std::size_t &common) {
    std::unordered_map<PointId, Eigen::Vector2d> lookup;
    for (const auto &p : a.points) lookup.emplace(p.id, p.pixel);
    double delta = 0.0;
    common = 0;
    for (const auto &p : b.points) {
        const auto it = lookup.find(p.id);
        if (it == lookup.end()) continue;
        ++common;
        delta = std::max(delta, (it->second - p.pixel).cwiseAbs().maxCoeff());
    }
    return delta;
}

double target_extent(const PlanarTarget &target) {
    Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector2d hi = -lo;
    for (const auto &tp : target.points()) {
        lo = lo.cwiseMin(Eigen::Vector2d(tp.x, tp.y));
        hi = hi.cwiseMax(Eigen::Vector2d(tp.x, tp.y));
    }
    return std::max((hi - lo).norm(), 1e-12);
}

} // namespace

PlanarMotionFit fit_planar_rotation(const Eigen::Matrix3d &G, double target_extent) {
    PlanarMotionFit fit;
    if (!(std::abs(G(2, 2)) > 0.0) || !G.allFinite()) {
        fit.deviation = std::numeric_limits<double>::infinity();
        return fit;
    }
    const Eigen::Matrix3d g = G / G(2, 2);
    const Eigen::Matrix2d B = g.topLeftCorner<2, 2>();
    const double perspective = target_extent * std::max(std::abs(g(2, 0)), std::abs(g(2, 1)));
    const double orthogonality = (B.transpose() * B - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff();
    const double handedness = std::abs(B.determinant() - 1.0);
    fit.deviation = std::max({perspective, orthogonality, handedness});
    fit.angle = std::atan2(B(1, 0) - B(0, 1), B(0, 0) + B(1, 1));
    return fit;
}

DegeneracyReport detect_degeneracy(const ObservationSet &observations, const DegeneracyOptions &options) {
    DegeneracyReport report;
    const auto &images = observations.images();
    const std::size_t n = images.size();

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t common = 0;
            const double delta = max_common_pixel_delta(images[i], images[j], common);
            if (common >= 4 && delta < options.translation_tolerance_px)
                report.pure_translation.push_back({i, j, delta});
        }
    }

    std::vector<Homography> Hs;
    try {
        for (std::size_t i = 0; i < n; ++i) Hs.push_back(estimate_homography(observations.correspondences(i)));
    } catch (const CalibrationError &) {
        return report;
    }

    const double extent = target_extent(observations.target());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Eigen::Matrix3d G = Hs[j].matrix().inverse() * Hs[i].matrix();
            const PlanarMotionFit fit = fit_planar_rotation(G, extent);
            if (fit.deviation < options.z_rotation_tolerance && std::abs(fit.angle) > options.min_rotation_angle)
                report.z_rotation.push_back({i, j, fit.deviation});
        }
    }

    const Conditioning cond = Conditioning::from_observations(observations);
    std::vector<Homography> conditioned;
    for (const auto &H : Hs) conditioned.push_back(cond.apply(H));
    for (std::size_t k = 0; k < n; ++k) {
        const std::vector<Homography> prefix(conditioned.begin(), conditioned.begin() + static_cast<long>(k + 1));
        report.rank_profile.push_back(numerical_rank(assemble_constraint_rows(prefix, 0).D, options.rank_tolerance));
    }
    const LinearSystem full = assemble_constraint_rows(conditioned, 0);
    report.singular_values = equilibrated_singular_values(full.D);
    report.rank = report.rank_profile.empty() ? 0 : report.rank_profile.back();
    return report;
}

} // namespace collimcal
