#pragma once

#include "collimcal/observations.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace collimcal {

struct DegeneracyOptions {
    /// Max pixel delta over shared ids for two images to count as the same view.
    double translation_tolerance_px = 1e-6;
    /// Deviation of H_j^-1 H_i from a planar rotation about a target point, in target units.
    double z_rotation_tolerance = 1e-6;
    /// Smallest rotation angle (rad) for a relative motion to be reported as a z rotation.
    double min_rotation_angle = 1e-6;
    /// Singular-value cutoff relative to sigma_max.
    double rank_tolerance = 1e-8;
};

struct DegeneratePair {
    std::size_t first = 0;
    std::size_t second = 0;
    double measure = 0.0; // max pixel delta, or structural deviation
};

struct DegeneracyReport {
    std::vector<DegeneratePair> pure_translation;
    std::vector<DegeneratePair> z_rotation;
    /// rank_profile[k] is the rank of the stacked system over images 0..k (base image 0).
    std::vector<int> rank_profile;
    int rank = 0;
    Eigen::VectorXd singular_values;

    bool flagged() const { return !pure_translation.empty() || !z_rotation.empty(); }
};

/// Never throws on degenerate data; homography failures are reported as rank 0 rows.
DegeneracyReport detect_degeneracy(const ObservationSet &observations, const DegeneracyOptions &options = {});

/// Residual of G = H_j^-1 H_i against the planar-rotation structure
/// [[c, -s, a], [s, c, b], [0, 0, 1]], measured in target units of the given extent,
/// together with the rotation angle.
struct PlanarMotionFit {
    double deviation = 0.0;
    double angle = 0.0;
};
PlanarMotionFit fit_planar_rotation(const Eigen::Matrix3d &G, double target_extent);

} // namespace collimcal
