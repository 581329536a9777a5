#include "collimcal/multi_solver.hpp"

#include "collimcal/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>

namespace collimcal {

namespace {

// Upper-triangle entry order shared by q, w and a.
constexpr std::array<std::pair<int, int>, 6> kSymEntries = {
    {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

struct WorldFrame {
    double scale = 1.0;
    Eigen::Vector2d offset = Eigen::Vector2d::Zero();
};

// world = [[s, 0, -s mx], [0, s, -s my], [0, 0, 1]] maps mm to conditioned units.
WorldFrame world_frame(const Conditioning &c) {
    const double s = c.world(0, 0);
    return {s, Eigen::Vector2d(-c.world(0, 2) / s, -c.world(1, 2) / s)};
}

CameraIntrinsics uncondition_intrinsics(const Conditioning &c, const CameraIntrinsics &Kc) {
    return CameraIntrinsics::from_matrix(c.pixel.inverse() * Kc.matrix());
}

// Rotations are recovered from the raw homographies so they are expressed in mm/px units.
std::vector<Rotation> recover_rotations(const std::vector<Homography> &homographies, const CameraIntrinsics &K) {
    std::vector<Rotation> Rs;
    Rs.reserve(homographies.size());
    for (const auto &H : homographies) Rs.push_back(decompose_homography(H, K).R);
    return Rs;
}

double checked_sqrt(double v, const char *what) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::negative_radicand, std::string("negative radicand in ") + what);
    return std::sqrt(v);
}

} // namespace

void SphericalExtrinsics::validate() const {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(r))
        fail(ErrorCode::invalid_input, "optical center is not finite");
    if (!(r > 0.0)) fail(ErrorCode::invalid_input, "spherical radius must be positive");
}

Eigen::Matrix3d IacVector::matrix() const {
    Eigen::Matrix3d Q;
    for (int k = 0; k < 6; ++k) {
        const auto [m, n] = kSymEntries[k];
        Q(m, n) = q[k];
        Q(n, m) = q[k];
    }
    return Q;
}

IacVector IacVector::from_intrinsics(const CameraIntrinsics &K) {
    const Eigen::Matrix3d Ki = K.inverse();
    const Eigen::Matrix3d Q = Ki.transpose() * Ki;
    IacVector v;
    for (int k = 0; k < 6; ++k) v.q[k] = Q(kSymEntries[k].first, kSymEntries[k].second);
    return v;
}

Conditioning Conditioning::from_observations(const ObservationSet &obs) {
    std::vector<Eigen::Vector2d> pixels;
    for (const auto &img : obs.images())
        for (const auto &p : img.points) pixels.push_back(p.pixel);
    std::vector<Eigen::Vector2d> world;
    for (const auto &tp : obs.target().points()) world.emplace_back(tp.x, tp.y);
    return {isotropic_normalization(pixels), isotropic_normalization(world)};
}

Homography Conditioning::apply(const Homography &H) const { return Homography(pixel * H.matrix() * world.inverse()); }

double scale_ratio(const Eigen::Matrix3d &H_i, const Eigen::Matrix3d &H_base) {
    const double det_base = H_base.determinant();
    if (!(std::abs(det_base) > 0.0)) fail(ErrorCode::singular_homography, "base homography is singular");
    return std::cbrt(H_i.determinant() / det_base);
}

double scale_ratio(const Homography &H_i, const Homography &H_base) {
    return scale_ratio(H_i.matrix(), H_base.matrix());
}

LinearSystem build_linear_system(const std::vector<Homography> &homographies, std::size_t base_index) {
    if (homographies.size() < 3) fail(ErrorCode::insufficient_points, "the linear system needs at least 3 images");
    return assemble_constraint_rows(homographies, base_index);
}

Eigen::VectorXd equilibrated_singular_values(const Eigen::MatrixXd &D) {
    Eigen::VectorXd col_norm = D.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < col_norm.size(); ++j)
        if (!(col_norm[j] > 0.0)) col_norm[j] = 1.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(D * col_norm.cwiseInverse().asDiagonal()).singularValues();
}

int numerical_rank(const Eigen::MatrixXd &D, double tolerance) {
    const Eigen::VectorXd s = equilibrated_singular_values(D);
    if (s.size() == 0 || !(s[0] > 0.0)) return 0;
    return static_cast<int>((s.array() > tolerance * s[0]).count());
}

LinearSystem assemble_constraint_rows(const std::vector<Homography> &homographies, std::size_t base_index) {
    if (homographies.empty()) fail(ErrorCode::insufficient_points, "no homographies");
    if (base_index >= homographies.size()) fail(ErrorCode::invalid_input, "base index out of range");

    const auto n = static_cast<Eigen::Index>(homographies.size());
    LinearSystem sys;
    sys.base_index = base_index;
    sys.D = Eigen::MatrixXd::Zero(LinearSystem::kRowsPerImage * n, LinearSystem::kColumns);
    sys.b = Eigen::VectorXd::Zero(LinearSystem::kRowsPerImage * n);

    const auto &H_base = homographies[base_index];
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &Hi = homographies[static_cast<std::size_t>(i)];
        Eigen::FullPivLU<Eigen::Matrix3d> lu(Hi.matrix());
        if (!lu.isInvertible()) fail(ErrorCode::singular_homography, "homography " + std::to_string(i) + " is singular");
        const Eigen::Matrix3d h = lu.inverse();
        const double rho = scale_ratio(Hi, H_base);
        sys.scale_ratios.push_back(rho);

        // (H^-1 W H^-T)_mn with W33 = 1 moved to the right-hand side, equal to A_mn / rho^2.
        for (int k = 0; k < 6; ++k) {
            const auto [m, nn] = kSymEntries[k];
            const Eigen::Index row = LinearSystem::kRowsPerImage * i + k;
            sys.D(row, 0) = h(m, 0) * h(nn, 0);
            sys.D(row, 1) = h(m, 0) * h(nn, 1) + h(m, 1) * h(nn, 0);
            sys.D(row, 2) = h(m, 0) * h(nn, 2) + h(m, 2) * h(nn, 0);
            sys.D(row, 3) = h(m, 1) * h(nn, 1);
            sys.D(row, 4) = h(m, 1) * h(nn, 2) + h(m, 2) * h(nn, 1);
            sys.D(row, 5 + k) = -1.0 / (rho * rho);
            sys.b(row) = -h(m, 2) * h(nn, 2);
        }
    }
    return sys;
}

SphericalSolution solve_closed_form(const std::vector<Homography> &homographies, std::size_t base_index,
                                    const Conditioning &conditioning, double rank_tolerance) {
    std::vector<Homography> conditioned;
    conditioned.reserve(homographies.size());
    for (const auto &H : homographies) conditioned.push_back(conditioning.apply(H));

    LinearSystem sys = build_linear_system(conditioned, base_index);

    // Each image block is scaled so its W coefficients have unit norm; otherwise images
    // with small inverse-homography entries are under-weighted in the algebraic fit.
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(conditioned.size()); ++i) {
        const Eigen::Index r0 = LinearSystem::kRowsPerImage * i;
        const double block_norm = sys.D.block(r0, 0, LinearSystem::kRowsPerImage, 5).norm();
        if (!(block_norm > 0.0)) fail(ErrorCode::rank_deficient, "image block carries no constraint");
        sys.D.middleRows(r0, LinearSystem::kRowsPerImage) /= block_norm;
        sys.b.segment(r0, LinearSystem::kRowsPerImage) /= block_norm;
    }

    // Column equilibration before the least-squares solve and the rank test.
    const Eigen::VectorXd col_norm = sys.D.colwise().norm().transpose();
    if ((col_norm.array() <= 0.0).any()) fail(ErrorCode::rank_deficient, "linear system has an empty column");
    const Eigen::MatrixXd Ds = sys.D * col_norm.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ds, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto &s = svd.singularValues();
    if (!(s(s.size() - 1) > rank_tolerance * s(0)))
        fail(ErrorCode::rank_deficient, "stacked spherical constraints are rank deficient");
    const Eigen::VectorXd sol = svd.solve(sys.b).cwiseQuotient(col_norm);

    // W = K K^T (conditioned units).
    const double cx = sol[2];
    const double cy = sol[4];
    const double fy = checked_sqrt(sol[3] - cy * cy, "fy");
    const double gamma = (sol[1] - cx * cy) / fy;
    const double fx = checked_sqrt(sol[0] - cx * cx - gamma * gamma, "fx");

    // A = (lambda_base r)^-2 [[r^2 + x^2, xy, x], [xy, r^2 + y^2, y], [x, y, 1]].
    const double a33 = sol[10];
    if (!(a33 > 0.0) || !std::isfinite(a33)) fail(ErrorCode::negative_radicand, "A33 must be positive");
    const double xc = sol[7] / a33;
    const double yc = sol[9] / a33;
    const double rc = checked_sqrt(sol[5] / a33 - xc * xc, "r");

    const CameraIntrinsics K = uncondition_intrinsics(conditioning, {fx, fy, cx, cy, gamma});
    const WorldFrame wf = world_frame(conditioning);

    SphericalSolution out;
    out.intrinsics = K;
    out.extrinsics.x = xc / wf.scale + wf.offset.x();
    out.extrinsics.y = yc / wf.scale + wf.offset.y();
    out.extrinsics.r = rc / wf.scale;
    out.extrinsics.rotations = recover_rotations(homographies, K);
    return out;
}

SphericalSolution solve_closed_form(const ObservationSet &observations, const ClosedFormOptions &options) {
    if (observations.image_count() < 3)
        fail(ErrorCode::insufficient_points, "closed-form solver needs at least 3 images");
    const std::size_t base = options.base_index.value_or(observations.most_observed_image());
    std::vector<Homography> Hs;
    Hs.reserve(observations.image_count());
    for (std::size_t i = 0; i < observations.image_count(); ++i)
        Hs.push_back(estimate_homography(observations.correspondences(i)));
    return solve_closed_form(Hs, base, Conditioning::from_observations(observations), options.rank_tolerance);
}

Eigen::Matrix<double, 6, 1> iac_constraint_row(const Eigen::Matrix3d &H, int m, int n) {
    Eigen::Matrix<double, 6, 1> u;
    u << H(0, m) * H(0, n), H(0, m) * H(1, n) + H(0, n) * H(1, m), H(0, m) * H(2, n) + H(0, n) * H(2, m),
        H(1, m) * H(1, n), H(1, m) * H(2, n) + H(1, n) * H(2, m), H(2, m) * H(2, n);
    return u;
}

HiddenVariableSystem build_hidden_variable_system(const Homography &H1, const Homography &H2) {
    HiddenVariableSystem sys;
    sys.C0.setZero();
    sys.C1.setZero();
    const std::array<const Eigen::Matrix3d *, 2> Hs = {&H1.matrix(), &H2.matrix()};
    for (int k = 0; k < 2; ++k) {
        const Eigen::Matrix3d &H = *Hs[k];
        const auto u11 = iac_constraint_row(H, 0, 0);
        sys.C0.row(3 * k) = iac_constraint_row(H, 0, 1).transpose();
        sys.C0.row(3 * k + 1) = (u11 - iac_constraint_row(H, 1, 1)).transpose();
        sys.C0.row(3 * k + 2) =
            (iac_constraint_row(H, 0, 2) + iac_constraint_row(H, 1, 2) + iac_constraint_row(H, 2, 2)).transpose();
        sys.C1.row(3 * k + 2) = u11.transpose();
    }

    // det is linear in each of the two c-dependent rows (2 and 5).
    auto det_with = [&](bool swap2, bool swap5) {
        Eigen::Matrix<double, 6, 6> M = sys.C0;
        if (swap2) M.row(2) = sys.C1.row(2);
        if (swap5) M.row(5) = sys.C1.row(5);
        return M.fullPivLu().determinant();
    };
    sys.determinant_coefficients << det_with(true, true), det_with(true, false) + det_with(false, true),
        det_with(false, false);
    return sys;
}

std::vector<MinimalCandidate> solve_minimal(const ObservationSet &observation_pair) {
    if (observation_pair.image_count() != 2) fail(ErrorCode::invalid_input, "minimal solver takes exactly 2 images");

    const Conditioning cond = Conditioning::from_observations(observation_pair);
    std::vector<Homography> raw;
    std::vector<Homography> hc;
    for (std::size_t i = 0; i < 2; ++i) {
        raw.push_back(estimate_homography(observation_pair.correspondences(i)));
        hc.push_back(cond.apply(raw.back()));
    }

    const HiddenVariableSystem sys = build_hidden_variable_system(hc[0], hc[1]);
    const double a = sys.determinant_coefficients[0];
    const double b = sys.determinant_coefficients[1];
    const double c = sys.determinant_coefficients[2];

    // Scale of a generic 6x6 determinant built from these rows.
    double row_scale = 1.0;
    for (int i = 0; i < 6; ++i) row_scale *= std::max(sys.C0.row(i).norm(), sys.C1.row(i).norm());
    const double coef_max = std::max({std::abs(a), std::abs(b), std::abs(c)});
    if (!(coef_max > 1e-10 * row_scale))
        fail(ErrorCode::degenerate_configuration, "hidden-variable determinant vanishes identically");

    std::vector<double> roots;
    if (std::abs(a) <= 1e-14 * coef_max) {
        if (std::abs(b) <= 1e-14 * coef_max) fail(ErrorCode::no_real_root, "determinant polynomial is constant");
        roots.push_back(-c / b);
    } else {
        double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) {
            if (-disc > 1e-12 * b * b) fail(ErrorCode::no_real_root, "hidden variable has no real root");
            disc = 0.0;
        }
        const double qv = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        roots.push_back(qv / a);
        if (qv != 0.0) roots.push_back(c / qv);
    }

    const WorldFrame wf = world_frame(cond);
    std::vector<MinimalCandidate> candidates;
    for (const double root : roots) {
        const Eigen::Matrix<double, 6, 6> C = sys.C0 + root * sys.C1;
        Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(C, Eigen::ComputeFullV);
        IacVector q;
        q.q = svd.matrixV().col(5);
        if (q.q[5] < 0.0) q.q = -q.q;

        CameraIntrinsics Kc;
        try {
            Kc = decompose_iac(q);
        } catch (const CalibrationError &) {
            continue;
        }

        // Joint least squares of the per-image x, y and |t_cp|^2 constraints.
        const Eigen::Matrix3d Q = q.matrix();
        double g11sq = 0.0, sx = 0.0, sy = 0.0, st = 0.0;
        std::array<Eigen::Matrix3d, 2> G;
        for (int k = 0; k < 2; ++k) {
            G[k] = hc[k].matrix().transpose() * Q * hc[k].matrix();
            g11sq += G[k](0, 0) * G[k](0, 0);
            sx += -G[k](0, 2) * G[k](0, 0);
            sy += -G[k](1, 2) * G[k](0, 0);
            st += G[k](2, 2) * G[k](0, 0);
        }
        const double xc = sx / g11sq;
        const double yc = sy / g11sq;
        const double tsq = st / g11sq;
        const double r2 = tsq - xc * xc - yc * yc;
        if (!(r2 > 0.0)) continue;

        double residual = 0.0;
        for (int k = 0; k < 2; ++k) {
            const auto &g = G[k];
            const std::array<double, 5> e = {g(0, 1), g(0, 0) - g(1, 1), g(0, 2) + xc * g(0, 0), g(1, 2) + yc * g(0, 0),
                                             g(2, 2) - tsq * g(0, 0)};
            for (double v : e) residual += v * v;
        }

        MinimalCandidate cand;
        cand.hidden_variable = root;
        cand.residual = residual;
        cand.solution.intrinsics = uncondition_intrinsics(cond, Kc);
        cand.solution.extrinsics.x = xc / wf.scale + wf.offset.x();
        cand.solution.extrinsics.y = yc / wf.scale + wf.offset.y();
        cand.solution.extrinsics.r = std::sqrt(r2) / wf.scale;
        cand.solution.extrinsics.rotations = recover_rotations(raw, cand.solution.intrinsics);
        candidates.push_back(std::move(cand));
    }

    if (candidates.empty())
        fail(ErrorCode::no_positive_definite_candidate, "no root yields a positive-definite conic with r > 0");
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const MinimalCandidate &l, const MinimalCandidate &r) { return l.residual < r.residual; });
    return candidates;
}

CameraIntrinsics decompose_iac(const IacVector &q) {
    Eigen::Matrix3d Q = q.matrix();
    if (!Q.allFinite()) fail(ErrorCode::not_positive_definite, "conic has non-finite entries");
    if (Q(2, 2) < 0.0) Q = -Q;
    Eigen::LLT<Eigen::Matrix3d> llt(Q);
    if (llt.info() != Eigen::Success) fail(ErrorCode::not_positive_definite, "conic is not positive definite");
    // Q = L L^T = U^T U with U = L^T = K^-1 up to scale.
    const Eigen::Matrix3d L = llt.matrixL();
    if ((L.diagonal().array() <= 0.0).any()) fail(ErrorCode::not_positive_definite, "conic is not positive definite");
    const Eigen::Matrix3d U = L.transpose();
    const Eigen::Matrix3d K = U.triangularView<Eigen::Upper>().solve(Eigen::Matrix3d::Identity());
    return CameraIntrinsics::from_matrix(K);
}

} // namespace collimcal
