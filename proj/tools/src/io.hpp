#pragma once

#include "collimcal/bundle.hpp"
#include "collimcal/camera.hpp"
#include "collimcal/monte_carlo.hpp"
#include "collimcal/observations.hpp"
#include "collimcal/single_image.hpp"
#include "collimcal/synth.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace collimcal::cli {

inline constexpr int kSchemaVersion = 1;

/// Malformed or invalid input file; message carries path:line:col when known.
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct GroundTruth {
    CameraIntrinsics intrinsics;
    Distortion distortion;
    std::vector<Eigen::Vector3d> t_cp; // per image
    std::vector<Rotation> rotations;
};

struct ObservationFile {
    ObservationSet observations;
    std::optional<std::pair<int, int>> image_size;
    std::optional<GroundTruth> ground_truth;
};

struct CameraFile {
    CameraIntrinsics intrinsics;
    Distortion distortion;
};

struct BenchmarkFile {
    SyntheticConfig config;
    std::vector<double> sweep_values; // empty: defaults for the chosen sweep
    SolverSelection solvers;
    RefinementConfig refinement;
};

/// Parsed document plus the raw text for locating keys in diagnostics.
struct Document {
    std::string path;
    std::string text;
    nlohmann::json json;
};

Document read_document(const std::string &path);
void write_text(const std::string &path, const std::string &text);

ObservationFile parse_observation_file(const Document &doc);
CameraFile parse_camera_file(const Document &doc);
RayDatabase parse_ray_database(const Document &doc);
SyntheticConfig parse_synthetic_config(const Document &doc);
BenchmarkFile parse_benchmark_file(const Document &doc);

nlohmann::json to_json(const CameraIntrinsics &K);
nlohmann::json to_json(const Distortion &d);
nlohmann::json to_json(const SyntheticConfig &c);
nlohmann::json to_json(const RefinementConfig &c);
nlohmann::json observation_file_json(const ObservationSet &obs, std::pair<int, int> image_size,
                                     const std::optional<GroundTruth> &truth, const nlohmann::json &config_echo);
nlohmann::json ray_database_json(const RayDatabase &db, const std::string &source);

/// Pretty JSON with a trailing newline.
std::string dump(const nlohmann::json &j);

} // namespace collimcal::cli
