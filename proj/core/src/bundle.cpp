#include "collimcal/bundle.hpp"

#include "collimcal/error.hpp"

#include <cmath>

namespace collimcal {

namespace {

constexpr int kCamera = 7; // fx fy cx cy gamma d1 d2

void write_camera(Eigen::VectorXd &p, const CameraIntrinsics &K, const Distortion &d) {
    p.head<5>() = K.to_vector();
    p[5] = d.d1;
    p[6] = d.d2;
}

CameraIntrinsics read_intrinsics(const Eigen::VectorXd &p) { return CameraIntrinsics::from_vector(p.head<5>()); }
Distortion read_distortion(const Eigen::VectorXd &p) { return {p[5], p[6]}; }

Rotation read_rotation(const Eigen::VectorXd &p, Eigen::Index at) { return Rotation::from_axis_angle(p.segment<3>(at)); }

void rotation_plus(Eigen::VectorXd &out, const Eigen::VectorXd &p, const Eigen::VectorXd &delta, Eigen::Index at) {
    out.segment<3>(at) = read_rotation(p, at).boxplus(delta.segment<3>(at)).axis_angle();
}

// Fills the camera columns of a 2-row block from a projection Jacobian.
void write_camera_block(Eigen::Ref<Eigen::MatrixXd> rows, const ProjectionJacobian &pj) {
    rows.leftCols<5>() = pj.d_intrinsics;
    rows.middleCols<2>(5) = pj.d_distortion;
}

std::size_t observation_count(const ObservationSet &obs) {
    std::size_t n = 0;
    for (const auto &img : obs.images()) n += img.points.size();
    return n;
}

void fill_per_image_rms(ResidualReport &report, const ObservationSet &obs, const Eigen::VectorXd &r) {
    report.per_image_rms.clear();
    Eigen::Index row = 0;
    for (const auto &img : obs.images()) {
        const auto len = static_cast<Eigen::Index>(2 * img.points.size());
        report.per_image_rms.push_back(len > 0 ? std::sqrt(r.segment(row, len).squaredNorm() / static_cast<double>(len))
                                               : 0.0);
        row += len;
    }
}

Eigen::Index spherical_image_count(const Eigen::VectorXd &p) {
    const Eigen::Index rest = p.size() - kCamera - 3;
    if (rest < 0 || rest % 3 != 0) fail(ErrorCode::invalid_input, "spherical parameter vector has the wrong length");
    return rest / 3;
}

Eigen::Index planar_image_count(const Eigen::VectorXd &p) {
    const Eigen::Index rest = p.size() - kCamera;
    if (rest < 0 || rest % 6 != 0) fail(ErrorCode::invalid_input, "planar parameter vector has the wrong length");
    return rest / 6;
}

void check_image_count(const ObservationSet &obs, Eigen::Index n) {
    if (static_cast<Eigen::Index>(obs.image_count()) != n)
        fail(ErrorCode::invalid_input, "parameter vector does not match the image count");
}

} // namespace

// ---- spherical ----

Eigen::VectorXd pack_spherical(const SphericalState &s) {
    const auto n = static_cast<Eigen::Index>(s.extrinsics.rotations.size());
    Eigen::VectorXd p(kCamera + 3 + 3 * n);
    write_camera(p, s.intrinsics, s.distortion);
    p.segment<3>(kCamera) = s.extrinsics.t_cp();
    for (Eigen::Index i = 0; i < n; ++i)
        p.segment<3>(kCamera + 3 + 3 * i) = s.extrinsics.rotations[static_cast<std::size_t>(i)].axis_angle();
    return p;
}

SphericalState unpack_spherical(const Eigen::VectorXd &p) {
    const Eigen::Index n = spherical_image_count(p);
    SphericalState s;
    s.intrinsics = read_intrinsics(p);
    s.distortion = read_distortion(p);
    s.extrinsics.x = p[kCamera];
    s.extrinsics.y = p[kCamera + 1];
    s.extrinsics.r = -p[kCamera + 2];
    for (Eigen::Index i = 0; i < n; ++i) s.extrinsics.rotations.push_back(read_rotation(p, kCamera + 3 + 3 * i));
    return s;
}

Eigen::VectorXd spherical_residuals(const ObservationSet &obs, const Eigen::VectorXd &p) {
    const Eigen::Index n = spherical_image_count(p);
    check_image_count(obs, n);
    const CameraIntrinsics K = read_intrinsics(p);
    const Distortion d = read_distortion(p);
    const Eigen::Vector3d t_cp = p.segment<3>(kCamera);

    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(observation_count(obs)));
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Rotation R = read_rotation(p, kCamera + 3 + 3 * i);
        for (const auto &ip : obs.images()[static_cast<std::size_t>(i)].points) {
            const TargetPoint &tp = obs.target().at(ip.id);
            const Eigen::Vector3d Pc = R * (Eigen::Vector3d(tp.x, tp.y, 0.0) - t_cp);
            r.segment<2>(row) = project_camera_point(K, d, Pc) - ip.pixel;
            row += 2;
        }
    }
    return r;
}

Eigen::MatrixXd spherical_jacobian(const ObservationSet &obs, const Eigen::VectorXd &p) {
    const Eigen::Index n = spherical_image_count(p);
    check_image_count(obs, n);
    const CameraIntrinsics K = read_intrinsics(p);
    const Distortion d = read_distortion(p);
    const Eigen::Vector3d t_cp = p.segment<3>(kCamera);

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(observation_count(obs)), p.size());
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index col = kCamera + 3 + 3 * i;
        const Rotation R = read_rotation(p, col);
        for (const auto &ip : obs.images()[static_cast<std::size_t>(i)].points) {
            const TargetPoint &tp = obs.target().at(ip.id);
            const Eigen::Vector3d v = Eigen::Vector3d(tp.x, tp.y, 0.0) - t_cp;
            const ProjectionJacobian pj = project_with_jacobian(K, d, R * v);
            auto rows = J.middleRows<2>(row);
            write_camera_block(rows, pj);
            rows.middleCols<3>(kCamera) = -pj.d_point * R.matrix();
            rows.middleCols<3>(col) = -pj.d_point * R.matrix() * skew(v);
            row += 2;
        }
    }
    return J;
}

Eigen::VectorXd spherical_plus(const Eigen::VectorXd &p, const Eigen::VectorXd &delta) {
    const Eigen::Index n = spherical_image_count(p);
    Eigen::VectorXd out = p;
    out.head<kCamera + 3>() += delta.head<kCamera + 3>();
    for (Eigen::Index i = 0; i < n; ++i) rotation_plus(out, p, delta, kCamera + 3 + 3 * i);
    return out;
}

SphericalBAResult spherical_ba(const ObservationSet &obs, const SphericalState &init, const RefinementConfig &config,
                               const SphericalBAOptions &options) {
    init.intrinsics.validate();
    if (!init.extrinsics.t_cp().allFinite()) fail(ErrorCode::invalid_input, "initial optical center is not finite");
    if (init.extrinsics.rotations.size() != obs.image_count())
        fail(ErrorCode::invalid_input, "one initial rotation per image is required");

    const Eigen::VectorXd x0 = pack_spherical(init);
    LeastSquaresProblem problem;
    problem.block_size = 2;
    problem.residual = [&](const Eigen::VectorXd &x) { return spherical_residuals(obs, x); };
    problem.jacobian = [&](const Eigen::VectorXd &x) { return spherical_jacobian(obs, x); };
    problem.plus = spherical_plus;
    problem.fixed.assign(static_cast<std::size_t>(x0.size()), false);
    if (options.fix_skew) problem.fixed[4] = true;
    if (options.fix_distortion) problem.fixed[5] = problem.fixed[6] = true;
    if (options.fix_center) problem.fixed[7] = problem.fixed[8] = problem.fixed[9] = true;

    const LmResult lm = lm_minimize(problem, x0, config);
    SphericalBAResult out{unpack_spherical(lm.parameters), lm.report};
    fill_per_image_rms(out.report, obs, spherical_residuals(obs, lm.parameters));
    return out;
}

// ---- single image ----

Eigen::VectorXd pack_single(const SingleImageState &s) {
    Eigen::VectorXd p(kCamera + 3);
    write_camera(p, s.intrinsics, s.distortion);
    p.segment<3>(kCamera) = s.rotation.axis_angle();
    return p;
}

SingleImageState unpack_single(const Eigen::VectorXd &p) {
    if (p.size() != kCamera + 3) fail(ErrorCode::invalid_input, "single-image parameter vector must have 10 entries");
    return {read_intrinsics(p), read_distortion(p), read_rotation(p, kCamera)};
}

Eigen::VectorXd single_residuals(const std::vector<RayCorrespondence> &corr, const Eigen::VectorXd &p) {
    const SingleImageState s = unpack_single(p);
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(corr.size()));
    for (std::size_t k = 0; k < corr.size(); ++k)
        r.segment<2>(2 * static_cast<Eigen::Index>(k)) =
            project_camera_point(s.intrinsics, s.distortion, s.rotation * corr[k].first) - corr[k].second;
    return r;
}

Eigen::MatrixXd single_jacobian(const std::vector<RayCorrespondence> &corr, const Eigen::VectorXd &p) {
    const SingleImageState s = unpack_single(p);
    Eigen::MatrixXd J(2 * static_cast<Eigen::Index>(corr.size()), p.size());
    for (std::size_t k = 0; k < corr.size(); ++k) {
        const ProjectionJacobian pj = project_with_jacobian(s.intrinsics, s.distortion, s.rotation * corr[k].first);
        auto rows = J.middleRows<2>(2 * static_cast<Eigen::Index>(k));
        write_camera_block(rows, pj);
        rows.middleCols<3>(kCamera) = -pj.d_point * s.rotation.matrix() * skew(corr[k].first);
    }
    return J;
}

Eigen::VectorXd single_plus(const Eigen::VectorXd &p, const Eigen::VectorXd &delta) {
    Eigen::VectorXd out = p;
    out.head<kCamera>() += delta.head<kCamera>();
    rotation_plus(out, p, delta, kCamera);
    return out;
}

SingleImageBAResult single_image_ba(const std::vector<RayCorrespondence> &corr, const SingleImageState &init,
                                    const RefinementConfig &config) {
    if (corr.size() < 8) fail(ErrorCode::insufficient_points, "single-image refinement needs at least 8 points");
    init.intrinsics.validate();
    LeastSquaresProblem problem;
    problem.block_size = 2;
    problem.residual = [&](const Eigen::VectorXd &x) { return single_residuals(corr, x); };
    problem.jacobian = [&](const Eigen::VectorXd &x) { return single_jacobian(corr, x); };
    problem.plus = single_plus;
    const LmResult lm = lm_minimize(problem, pack_single(init), config);
    SingleImageBAResult out{unpack_single(lm.parameters), lm.report};
    out.report.per_image_rms = {out.report.rms_reprojection};
    return out;
}

// ---- planar ----

Eigen::VectorXd pack_planar(const PlanarState &s) {
    const auto n = static_cast<Eigen::Index>(s.rotations.size());
    if (s.translations.size() != s.rotations.size())
        fail(ErrorCode::invalid_input, "one translation per rotation is required");
    Eigen::VectorXd p(kCamera + 6 * n);
    write_camera(p, s.intrinsics, s.distortion);
    for (Eigen::Index i = 0; i < n; ++i) {
        p.segment<3>(kCamera + 6 * i) = s.rotations[static_cast<std::size_t>(i)].axis_angle();
        p.segment<3>(kCamera + 6 * i + 3) = s.translations[static_cast<std::size_t>(i)];
    }
    return p;
}

PlanarState unpack_planar(const Eigen::VectorXd &p) {
    const Eigen::Index n = planar_image_count(p);
    PlanarState s;
    s.intrinsics = read_intrinsics(p);
    s.distortion = read_distortion(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        s.rotations.push_back(read_rotation(p, kCamera + 6 * i));
        s.translations.emplace_back(p.segment<3>(kCamera + 6 * i + 3));
    }
    return s;
}

Eigen::VectorXd planar_residuals(const ObservationSet &obs, const Eigen::VectorXd &p) {
    const Eigen::Index n = planar_image_count(p);
    check_image_count(obs, n);
    const CameraIntrinsics K = read_intrinsics(p);
    const Distortion d = read_distortion(p);
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(observation_count(obs)));
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Rotation R = read_rotation(p, kCamera + 6 * i);
        const Eigen::Vector3d t = p.segment<3>(kCamera + 6 * i + 3);
        for (const auto &ip : obs.images()[static_cast<std::size_t>(i)].points) {
            const TargetPoint &tp = obs.target().at(ip.id);
            r.segment<2>(row) = project(K, d, R, t, Eigen::Vector3d(tp.x, tp.y, 0.0)) - ip.pixel;
            row += 2;
        }
    }
    return r;
}

Eigen::MatrixXd planar_jacobian(const ObservationSet &obs, const Eigen::VectorXd &p) {
    const Eigen::Index n = planar_image_count(p);
    check_image_count(obs, n);
    const CameraIntrinsics K = read_intrinsics(p);
    const Distortion d = read_distortion(p);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(observation_count(obs)), p.size());
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index col = kCamera + 6 * i;
        const Rotation R = read_rotation(p, col);
        const Eigen::Vector3d t = p.segment<3>(col + 3);
        for (const auto &ip : obs.images()[static_cast<std::size_t>(i)].points) {
            const TargetPoint &tp = obs.target().at(ip.id);
            const Eigen::Vector3d P(tp.x, tp.y, 0.0);
            const ProjectionJacobian pj = project_with_jacobian(K, d, R * P + t);
            auto rows = J.middleRows<2>(row);
            write_camera_block(rows, pj);
            rows.middleCols<3>(col) = -pj.d_point * R.matrix() * skew(P);
            rows.middleCols<3>(col + 3) = pj.d_point;
            row += 2;
        }
    }
    return J;
}

Eigen::VectorXd planar_plus(const Eigen::VectorXd &p, const Eigen::VectorXd &delta) {
    const Eigen::Index n = planar_image_count(p);
    Eigen::VectorXd out = p;
    out.head<kCamera>() += delta.head<kCamera>();
    for (Eigen::Index i = 0; i < n; ++i) {
        rotation_plus(out, p, delta, kCamera + 6 * i);
        out.segment<3>(kCamera + 6 * i + 3) += delta.segment<3>(kCamera + 6 * i + 3);
    }
    return out;
}

PlanarBAResult planar_ba(const ObservationSet &obs, const PlanarState &init, const RefinementConfig &config) {
    init.intrinsics.validate();
    if (init.rotations.size() != obs.image_count()) fail(ErrorCode::invalid_input, "one pose per image is required");
    LeastSquaresProblem problem;
    problem.block_size = 2;
    problem.residual = [&](const Eigen::VectorXd &x) { return planar_residuals(obs, x); };
    problem.jacobian = [&](const Eigen::VectorXd &x) { return planar_jacobian(obs, x); };
    problem.plus = planar_plus;
    const LmResult lm = lm_minimize(problem, pack_planar(init), config);
    PlanarBAResult out{unpack_planar(lm.parameters), lm.report};
    fill_per_image_rms(out.report, obs, planar_residuals(obs, lm.parameters));
    return out;
}

} // namespace collimcal
