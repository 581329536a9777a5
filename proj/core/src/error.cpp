#include "collimcal/error.hpp"

namespace collimcal {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::point_behind_camera: return "point-behind-camera";
    case ErrorCode::undistortion_diverged: return "undistortion-diverged";
    case ErrorCode::degenerate_configuration: return "degenerate-configuration";
    case ErrorCode::singular_homography: return "singular-homography";
    case ErrorCode::rank_deficient: return "rank-deficient";
    case ErrorCode::negative_radicand: return "negative-radicand";
    case ErrorCode::no_real_root: return "no-real-root";
    case ErrorCode::no_positive_definite_candidate: return "no-positive-definite-candidate";
    case ErrorCode::not_positive_definite: return "not-positive-definite";
    case ErrorCode::no_positive_root: return "no-positive-root";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::solve_failure: return "solve-failure";
    case ErrorCode::zero_vector: return "zero-vector";
    case ErrorCode::duplicate_id: return "duplicate-id";
    case ErrorCode::insufficient_points: return "insufficient-points";
    }
    return "unknown";
}

} // namespace collimcal
