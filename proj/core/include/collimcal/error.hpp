#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace collimcal {

enum class ErrorCode {
    invalid_input,
    point_behind_camera,
    undistortion_diverged,
    degenerate_configuration,
    singular_homography,
    rank_deficient,
    negative_radicand,
    no_real_root,
    no_positive_definite_candidate,
    not_positive_definite,
    no_positive_root,
    non_convergence,
    solve_failure,
    zero_vector,
    duplicate_id,
    insufficient_points,
};

std::string_view to_string(ErrorCode code);

class CalibrationError : public std::runtime_error {
  public:
    CalibrationError(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    // Stage tag prefixed by pipelines that chain several solvers.
    CalibrationError with_stage(std::string_view stage) const {
        CalibrationError e(code_, std::string(stage) + ": " + detail());
        return e;
    }

    std::string detail() const {
        std::string msg = what();
        const auto prefix = std::string(to_string(code_)) + ": ";
        return msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg;
    }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &what) { throw CalibrationError(code, what); }

} // namespace collimcal
