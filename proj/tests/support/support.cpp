#include "support.hpp"

#include <Eigen/Dense>

namespace collimcal::testing {

std::vector<Eigen::Vector3d> orthogonal_triple_roots(double r, int grid) {
    const OrthogonalTriple pts(r);
    const double lo = -3.0 * r;
    const double step = 6.0 * r / (grid - 1);
    auto at = [&](int i, int j, int k) { return Eigen::Vector3d(lo + i * step, lo + j * step, lo + k * step); };
    auto cost = [&](const Eigen::Vector3d &t) {
        const Eigen::Vector3d c = triple_cosines(pts, t);
        return c.allFinite() ? c.squaredNorm() : std::numeric_limits<double>::infinity();
    };

    std::vector<double> values(static_cast<std::size_t>(grid) * grid * grid);
    auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(i) * grid + j) * grid + k; };
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
            for (int k = 0; k < grid; ++k) values[idx(i, j, k)] = cost(at(i, j, k));

    std::vector<Eigen::Vector3d> roots;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
            for (int k = 0; k < grid; ++k) {
                const double v = values[idx(i, j, k)];
                bool minimum = std::isfinite(v);
                for (int di = -1; di <= 1 && minimum; ++di)
                    for (int dj = -1; dj <= 1 && minimum; ++dj)
                        for (int dk = -1; dk <= 1 && minimum; ++dk) {
                            const int a = i + di, b = j + dj, c = k + dk;
                            if (a < 0 || b < 0 || c < 0 || a >= grid || b >= grid || c >= grid) continue;
                            if (values[idx(a, b, c)] < v) minimum = false;
                        }
                if (!minimum) continue;

                Eigen::Vector3d t = at(i, j, k);
                for (int it = 0; it < 100; ++it) {
                    const Eigen::Vector3d f = triple_cosines(pts, t);
                    Eigen::Matrix3d J;
                    const double h = 1e-7 * r;
                    for (int d = 0; d < 3; ++d) {
                        Eigen::Vector3d e = Eigen::Vector3d::Zero();
                        e[d] = h;
                        J.col(d) = (triple_cosines(pts, t + e) - triple_cosines(pts, t - e)) / (2.0 * h);
                    }
                    const Eigen::Vector3d step_t = J.completeOrthogonalDecomposition().solve(-f);
                    if (!step_t.allFinite()) break;
                    t += step_t;
                    if (step_t.norm() < 1e-14 * r) break;
                }
                if (!(triple_cosines(pts, t).norm() < 1e-10)) continue;
                bool known = false;
                for (const auto &q : roots) known = known || (q - t).norm() < 1e-6 * r;
                if (!known) roots.push_back(t);
            }
    return roots;
}

} // namespace collimcal::testing
