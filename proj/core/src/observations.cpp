#include "collimcal/observations.hpp"

#include "collimcal/error.hpp"

#include <Eigen/LU>

#include <cmath>
#include <unordered_set>

namespace collimcal {

PlanarTarget::PlanarTarget(std::vector<TargetPoint> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i].x) || !std::isfinite(points_[i].y))
            fail(ErrorCode::invalid_input, "target point " + std::to_string(points_[i].id) + " is not finite");
        if (!index_.emplace(points_[i].id, i).second)
            fail(ErrorCode::duplicate_id, "target point id " + std::to_string(points_[i].id) + " repeated");
    }
    if (points_.size() < 4) fail(ErrorCode::insufficient_points, "a planar target needs at least 4 points");

    // Collinearity: second singular value of the centered point cloud.
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto &p : points_) mean += Eigen::Vector2d(p.x, p.y);
    mean /= static_cast<double>(points_.size());
    Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
    for (const auto &p : points_) {
        const Eigen::Vector2d d = Eigen::Vector2d(p.x, p.y) - mean;
        S += d * d.transpose();
    }
    const double tr = S.trace();
    if (!(tr > 0.0) || S.determinant() <= 1e-12 * tr * tr)
        fail(ErrorCode::degenerate_configuration, "target points are collinear");
}

PlanarTarget PlanarTarget::grid(int rows, int cols, double square_size_mm) {
    if (rows < 2 || cols < 2 || !(square_size_mm > 0.0))
        fail(ErrorCode::invalid_input, "grid needs at least 2x2 points and a positive pitch");
    std::vector<TargetPoint> pts;
    pts.reserve(static_cast<std::size_t>(rows * cols));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            pts.push_back({static_cast<PointId>(r * cols + c), c * square_size_mm, r * square_size_mm});
    return PlanarTarget(std::move(pts));
}

const TargetPoint &PlanarTarget::at(PointId id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) fail(ErrorCode::invalid_input, "unknown target point id " + std::to_string(id));
    return points_[it->second];
}

ObservationSet::ObservationSet(PlanarTarget target, std::vector<ImageObservations> images)
    : target_(std::move(target)), images_(std::move(images)) {
    for (const auto &img : images_) {
        std::unordered_set<PointId> seen;
        for (const auto &p : img.points) {
            if (!target_.contains(p.id))
                fail(ErrorCode::invalid_input,
                     "image '" + img.name + "' references unknown point id " + std::to_string(p.id));
            if (!seen.insert(p.id).second)
                fail(ErrorCode::duplicate_id, "image '" + img.name + "' repeats point id " + std::to_string(p.id));
            if (!p.pixel.allFinite())
                fail(ErrorCode::invalid_input, "image '" + img.name + "' has a non-finite pixel");
        }
        if (img.points.size() < 4)
            fail(ErrorCode::insufficient_points, "image '" + img.name + "' has fewer than 4 observed points");
    }
}

std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> ObservationSet::correspondences(std::size_t image) const {
    const auto &img = images_.at(image);
    std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> out;
    out.reserve(img.points.size());
    for (const auto &p : img.points) {
        const auto &tp = target_.at(p.id);
        out.emplace_back(Eigen::Vector2d(tp.x, tp.y), p.pixel);
    }
    return out;
}

ObservationSet ObservationSet::subset(const std::vector<std::size_t> &image_indices) const {
    std::vector<ImageObservations> imgs;
    imgs.reserve(image_indices.size());
    for (auto i : image_indices) imgs.push_back(images_.at(i));
    return ObservationSet(target_, std::move(imgs));
}

std::size_t ObservationSet::most_observed_image() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < images_.size(); ++i)
        if (images_[i].points.size() > images_[best].points.size()) best = i;
    return best;
}

} // namespace collimcal
