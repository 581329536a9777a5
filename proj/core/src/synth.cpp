#include "collimcal/synth.hpp"

#include "collimcal/error.hpp"
#include "collimcal/multi_solver.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace collimcal {

namespace {

enum Stream : std::uint64_t { kRotation = 0, kPixelNoise = 1, kCenterNoise = 2 };

std::uint64_t image_stream(std::uint64_t seed, std::size_t image, Stream s) {
    return mix_seed(seed, 3 * static_cast<std::uint64_t>(image) + s);
}

Rotation sample_rotation(std::mt19937_64 &rng, double max_angle) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, max_angle);
    Eigen::Vector3d axis;
    do {
        axis = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    } while (axis.norm() < 1e-12);
    return Rotation::from_axis_angle(axis.normalized() * uniform(rng));
}

bool in_image(const Eigen::Vector2d &p, const SyntheticConfig &c) {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < c.width && p.y() < c.height;
}

// Visible when in front of the camera, inside the monotone region of the distortion, and inside the image.
bool visible_pixel(const SyntheticConfig &c, double max_radius, const Eigen::Vector3d &Pc, Eigen::Vector2d &pixel) {
    if (!(Pc.z() > 0.0)) return false;
    if (Pc.head<2>().norm() / Pc.z() > max_radius) return false;
    pixel = project_camera_point(c.intrinsics, c.distortion, Pc);
    return in_image(pixel, c);
}

int count_visible(const SyntheticConfig &c, const PlanarTarget &target, const SphericalPose &pose) {
    const double max_radius = max_normalized_radius(c.intrinsics, c.width, c.height);
    int n = 0;
    Eigen::Vector2d px;
    for (const auto &tp : target.points())
        if (visible_pixel(c, max_radius, pose.R_pc * (Eigen::Vector3d(tp.x, tp.y, 0.0) - pose.t_cp), px)) ++n;
    return n;
}

} // namespace

void SyntheticConfig::validate() const {
    intrinsics.validate();
    if (width <= 0 || height <= 0) fail(ErrorCode::invalid_input, "image size must be positive");
    if (target.rows < 2 || target.cols < 2 || !(target.square_mm > 0.0))
        fail(ErrorCode::invalid_input, "target grid needs at least 2x2 points and a positive pitch");
    if (!(radius_mm > 0.0)) fail(ErrorCode::invalid_input, "radius must be positive");
    if (!target_offset.allFinite()) fail(ErrorCode::invalid_input, "target offset is not finite");
    if (!(pixel_noise_sigma >= 0.0) || !(spherical_noise_sigma >= 0.0))
        fail(ErrorCode::invalid_input, "noise sigmas must be non-negative");
    if (image_count < 1 || trial_count < 1) fail(ErrorCode::invalid_input, "counts must be at least 1");
    if (!(max_angle_deg >= 0.0) || max_angle_deg > 90.0) fail(ErrorCode::invalid_input, "max angle must be in [0, 90]");
    if (min_visible_points < 4) fail(ErrorCode::invalid_input, "min_visible_points must be at least 4");
    if (max_resample_attempts < 1) fail(ErrorCode::invalid_input, "max_resample_attempts must be at least 1");
    if (!distortion.is_monotone_up_to(max_normalized_radius(intrinsics, width, height)))
        fail(ErrorCode::invalid_input, "distortion is not monotone over the image");
}

Eigen::Matrix3d SphericalPose::motion_matrix() const {
    Eigen::Matrix3d M;
    M.col(0) = R_pc.matrix().col(0);
    M.col(1) = R_pc.matrix().col(1);
    M.col(2) = translation();
    return M;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<SphericalPose> generate_spherical_poses(const SyntheticConfig &config, std::uint64_t seed) {
    config.validate();
    const PlanarTarget target = PlanarTarget::grid(config.target.rows, config.target.cols, config.target.square_mm);
    const double max_angle = config.max_angle_deg * std::numbers::pi / 180.0;

    std::vector<SphericalPose> poses;
    poses.reserve(static_cast<std::size_t>(config.image_count));
    for (std::size_t i = 0; i < static_cast<std::size_t>(config.image_count); ++i) {
        std::mt19937_64 rot_rng(image_stream(seed, i, kRotation));
        std::mt19937_64 center_rng(image_stream(seed, i, kCenterNoise));
        std::normal_distribution<double> normal(0.0, 1.0);

        SphericalPose pose;
        const Eigen::Vector3d unit_noise(normal(center_rng), normal(center_rng), normal(center_rng));
        pose.t_cp = config.t_cp() + config.spherical_noise_sigma * unit_noise;

        bool ok = false;
        for (int attempt = 0; attempt < config.max_resample_attempts && !ok; ++attempt) {
            pose.R_pc = sample_rotation(rot_rng, max_angle);
            ok = count_visible(config, target, pose) >= config.min_visible_points;
        }
        if (!ok)
            fail(ErrorCode::degenerate_configuration,
                 "could not keep the target visible for image " + std::to_string(i) + "; narrow the view cone");
        poses.push_back(pose);
    }
    return poses;
}

ObservationSet render_observations(const std::vector<SphericalPose> &poses, const SyntheticConfig &config,
                                   std::uint64_t seed) {
    const PlanarTarget target = PlanarTarget::grid(config.target.rows, config.target.cols, config.target.square_mm);
    const double max_radius = max_normalized_radius(config.intrinsics, config.width, config.height);

    std::vector<ImageObservations> images;
    images.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        std::mt19937_64 rng(image_stream(seed, i, kPixelNoise));
        std::normal_distribution<double> normal(0.0, 1.0);
        ImageObservations img;
        img.name = "img_" + std::to_string(i);
        for (const auto &tp : target.points()) {
            // Noise drawn for every grid point so visibility does not shift the stream.
            const Eigen::Vector2d noise(normal(rng), normal(rng));
            const Eigen::Vector3d Pc = poses[i].R_pc * (Eigen::Vector3d(tp.x, tp.y, 0.0) - poses[i].t_cp);
            Eigen::Vector2d px;
            if (!visible_pixel(config, max_radius, Pc, px)) continue;
            img.points.push_back({tp.id, px + config.pixel_noise_sigma * noise});
        }
        images.push_back(std::move(img));
    }
    return ObservationSet(target, std::move(images));
}

ImageObservations render_collimated(const Rotation &R_pc, const Eigen::Vector3d &camera_translation,
                                    const SyntheticConfig &config) {
    const PlanarTarget target = PlanarTarget::grid(config.target.rows, config.target.cols, config.target.square_mm);
    const double max_radius = max_normalized_radius(config.intrinsics, config.width, config.height);
    ImageObservations img;
    img.name = "collimated";
    for (const auto &tp : target.points()) {
        const Eigen::Vector4d P(tp.x - config.target_offset.x(), tp.y - config.target_offset.y(), config.radius_mm, 0.0);
        const Eigen::Vector3d Pc = R_pc.matrix() * P.head<3>() + P.w() * camera_translation;
        Eigen::Vector2d px;
        if (visible_pixel(config, max_radius, Pc, px)) img.points.push_back({tp.id, px});
    }
    return img;
}

SyntheticScene generate_scene(const SyntheticConfig &config, std::uint64_t trial_seed) {
    SyntheticScene scene;
    scene.poses = generate_spherical_poses(config, trial_seed);
    scene.observations = render_observations(scene.poses, config, trial_seed);
    return scene;
}

SingleImageScene generate_single_image_scene(const SyntheticConfig &config, const CameraIntrinsics &reference_K,
                                             const Distortion &reference_d, std::uint64_t seed,
                                             double reference_noise_sigma) {
    SyntheticConfig ref = config;
    ref.intrinsics = reference_K;
    ref.distortion = reference_d;
    ref.pixel_noise_sigma = reference_noise_sigma;
    ref.image_count = 1;
    SyntheticConfig cal = config;
    cal.image_count = 1;

    SingleImageScene scene;
    const std::uint64_t ref_seed = mix_seed(seed, 0x5245);
    const std::uint64_t cal_seed = mix_seed(seed, 0x43414c);
    scene.reference_pose = generate_spherical_poses(ref, ref_seed).front();
    scene.calibration_pose = generate_spherical_poses(cal, cal_seed).front();
    scene.reference = render_observations({scene.reference_pose}, ref, ref_seed).images().front().points;
    scene.calibration = render_observations({scene.calibration_pose}, cal, cal_seed).images().front();
    scene.calibration.name = "calibration";
    return scene;
}

CameraIntrinsics zhang_init(const ObservationSet &observations) {
    const std::size_t n = observations.image_count();
    if (n < 3) fail(ErrorCode::insufficient_points, "plane-based calibration needs at least 3 images");
    const Conditioning cond = Conditioning::from_observations(observations);

    Eigen::MatrixXd V(2 * static_cast<Eigen::Index>(n), 6);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Matrix3d H = cond.apply(estimate_homography(observations.correspondences(i))).matrix();
        const auto row = 2 * static_cast<Eigen::Index>(i);
        V.row(row) = iac_constraint_row(H, 0, 1).transpose();
        V.row(row + 1) = (iac_constraint_row(H, 0, 0) - iac_constraint_row(H, 1, 1)).transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeFullV);
    const auto &s = svd.singularValues();
    if (!(s(4) > 1e-8 * s(0))) fail(ErrorCode::rank_deficient, "plane-based constraints are rank deficient");
    IacVector q;
    q.q = svd.matrixV().col(5);
    const CameraIntrinsics Kc = decompose_iac(q);
    return CameraIntrinsics::from_matrix(cond.pixel.inverse() * Kc.matrix());
}

ZhangSolution zhang_calibrate(const ObservationSet &observations) {
    ZhangSolution out;
    out.intrinsics = zhang_init(observations);
    for (std::size_t i = 0; i < observations.image_count(); ++i)
        out.poses.push_back(decompose_homography(estimate_homography(observations.correspondences(i)), out.intrinsics));
    return out;
}

} // namespace collimcal
