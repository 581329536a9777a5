#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace collimcal {

using PointId = std::int64_t;

struct TargetPoint {
    PointId id = 0;
    double x = 0.0; // mm
    double y = 0.0; // mm
};

/// Planar calibration target on Z = 0, coordinates in mm.
class PlanarTarget {
  public:
    PlanarTarget() = default;
    /// Throws duplicate_id, insufficient_points (< 4) or degenerate_configuration (collinear).
    explicit PlanarTarget(std::vector<TargetPoint> points);

    /// rows x cols grid with the given pitch; ids are row-major from 0, origin at the first point.
    static PlanarTarget grid(int rows, int cols, double square_size_mm);

    const std::vector<TargetPoint> &points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    bool contains(PointId id) const { return index_.count(id) != 0; }
    /// Throws invalid_input when the id is unknown.
    const TargetPoint &at(PointId id) const;

  private:
    std::vector<TargetPoint> points_;
    std::unordered_map<PointId, std::size_t> index_;
};

struct ImagePoint {
    PointId id = 0;
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

struct ImageObservations {
    std::string name;
    std::vector<ImagePoint> points;
};

/// Per-image observed pixels paired with the planar target model.
class ObservationSet {
  public:
    ObservationSet() = default;
    /// Throws when an image references an unknown id, repeats an id, or has < 4 points.
    ObservationSet(PlanarTarget target, std::vector<ImageObservations> images);

    const PlanarTarget &target() const { return target_; }
    const std::vector<ImageObservations> &images() const { return images_; }
    std::size_t image_count() const { return images_.size(); }

    /// (target XY in mm, pixel) pairs of one image, in observation order.
    std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> correspondences(std::size_t image) const;

    /// Observation set holding only the listed images, in the given order.
    ObservationSet subset(const std::vector<std::size_t> &image_indices) const;

    /// Image with the most observed points; ties go to the lowest index.
    std::size_t most_observed_image() const;

  private:
    PlanarTarget target_;
    std::vector<ImageObservations> images_;
};

} // namespace collimcal
