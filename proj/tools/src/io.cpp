#include "io.hpp"

#include "collimcal/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace collimcal::cli {

using nlohmann::json;

namespace {

std::string line_col(const std::string &text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

class Reader {
  public:
    explicit Reader(const Document &doc) : doc_(doc) {}

    [[noreturn]] void error(const std::string &key, const std::string &msg) const {
        std::string where = doc_.path;
        if (!key.empty()) {
            const auto pos = doc_.text.find("\"" + key + "\"");
            if (pos != std::string::npos) where += ":" + line_col(doc_.text, pos);
        }
        throw InputError(where + ": " + msg);
    }

    const json &require(const json &obj, const std::string &key) const {
        if (!obj.is_object()) error(key, "expected an object containing '" + key + "'");
        const auto it = obj.find(key);
        if (it == obj.end()) error(key, "missing required key '" + key + "'");
        return *it;
    }

    double number(const json &v, const std::string &key) const {
        if (!v.is_number()) error(key, "'" + key + "' must be a number");
        return v.get<double>();
    }

    double number(const json &obj, const std::string &key, double fallback) const {
        const auto it = obj.find(key);
        return it == obj.end() ? fallback : number(*it, key);
    }

    long long integer(const json &v, const std::string &key) const {
        if (!v.is_number_integer()) error(key, "'" + key + "' must be an integer");
        return v.get<long long>();
    }

    long long integer(const json &obj, const std::string &key, long long fallback) const {
        const auto it = obj.find(key);
        return it == obj.end() ? fallback : integer(*it, key);
    }

    bool boolean(const json &obj, const std::string &key, bool fallback) const {
        const auto it = obj.find(key);
        if (it == obj.end()) return fallback;
        if (!it->is_boolean()) error(key, "'" + key + "' must be true or false");
        return it->get<bool>();
    }

    const json &array(const json &v, const std::string &key) const {
        if (!v.is_array()) error(key, "'" + key + "' must be an array");
        return v;
    }

    Eigen::VectorXd vector(const json &v, const std::string &key, Eigen::Index n) const {
        array(v, key);
        if (static_cast<Eigen::Index>(v.size()) != n)
            error(key, "'" + key + "' must have " + std::to_string(n) + " entries");
        Eigen::VectorXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) out[i] = number(v[static_cast<std::size_t>(i)], key);
        return out;
    }

    void only_keys(const json &obj, const std::set<std::string> &allowed, const std::string &context) const {
        if (!obj.is_object()) error(context, "'" + context + "' must be an object");
        for (const auto &[k, _] : obj.items())
            if (!allowed.count(k)) error(k, "unknown key '" + k + "' in " + context);
    }

    void header(const std::string &kind) const {
        const json &root = doc_.json;
        if (!root.is_object()) error("", "top level must be an object");
        const long long version = integer(require(root, "schema_version"), "schema_version");
        if (version != kSchemaVersion)
            error("schema_version", "unsupported schema_version " + std::to_string(version));
        const json &k = require(root, "kind");
        if (!k.is_string() || k.get<std::string>() != kind) error("kind", "expected kind '" + kind + "'");
    }

    CameraIntrinsics intrinsics(const json &v) const {
        only_keys(v, {"fx", "fy", "cx", "cy", "gamma"}, "intrinsics");
        CameraIntrinsics K{number(require(v, "fx"), "fx"), number(require(v, "fy"), "fy"),
                           number(require(v, "cx"), "cx"), number(require(v, "cy"), "cy"),
                           number(v, "gamma", 0.0)};
        try {
            K.validate();
        } catch (const CalibrationError &e) {
            error("intrinsics", e.detail());
        }
        return K;
    }

    Distortion distortion(const json &v) const {
        only_keys(v, {"d1", "d2"}, "distortion");
        return {number(v, "d1", 0.0), number(v, "d2", 0.0)};
    }

    const Document &doc() const { return doc_; }

  private:
    const Document &doc_;
};

json vec_json(const Eigen::Ref<const Eigen::VectorXd> &v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

} // namespace

Document read_document(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    Document doc{path, ss.str(), {}};
    try {
        doc.json = json::parse(doc.text);
    } catch (const json::parse_error &e) {
        throw InputError(path + ":" + line_col(doc.text, e.byte > 0 ? e.byte - 1 : 0) + ": malformed JSON (" +
                         e.what() + ")");
    }
    return doc;
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path + ": cannot open for writing");
    out << text;
    if (!out) throw InputError(path + ": write failed");
}

std::string dump(const json &j) { return j.dump(2) + "\n"; }

ObservationFile parse_observation_file(const Document &doc) {
    Reader rd(doc);
    rd.header("observations");
    const json &root = doc.json;
    rd.only_keys(root, {"schema_version", "kind", "units", "image_size", "target", "images", "ground_truth", "config"},
                 "observation file");

    std::vector<TargetPoint> points;
    const json &target = rd.require(root, "target");
    for (const json &p : rd.array(rd.require(target, "points"), "points"))
        points.push_back({rd.integer(rd.require(p, "id"), "id"), rd.number(rd.require(p, "x"), "x"),
                          rd.number(rd.require(p, "y"), "y")});

    std::vector<ImageObservations> images;
    for (const json &img : rd.array(rd.require(root, "images"), "images")) {
        ImageObservations io;
        if (img.contains("name") && img["name"].is_string()) io.name = img["name"].get<std::string>();
        for (const json &p : rd.array(rd.require(img, "points"), "points"))
            io.points.push_back({rd.integer(rd.require(p, "id"), "id"),
                                 {rd.number(rd.require(p, "u"), "u"), rd.number(rd.require(p, "v"), "v")}});
        images.push_back(std::move(io));
    }

    ObservationFile out;
    try {
        out.observations = ObservationSet(PlanarTarget(std::move(points)), std::move(images));
    } catch (const CalibrationError &e) {
        rd.error("images", e.what());
    }

    if (root.contains("image_size")) {
        const Eigen::VectorXd s = rd.vector(root["image_size"], "image_size", 2);
        if (!(s[0] > 0.0) || !(s[1] > 0.0)) rd.error("image_size", "image size must be positive");
        out.image_size = std::make_pair(static_cast<int>(s[0]), static_cast<int>(s[1]));
    }

    if (root.contains("ground_truth")) {
        const json &gt = root["ground_truth"];
        rd.only_keys(gt, {"intrinsics", "distortion", "t_cp", "rotations"}, "ground_truth");
        GroundTruth truth;
        truth.intrinsics = rd.intrinsics(rd.require(gt, "intrinsics"));
        truth.distortion = gt.contains("distortion") ? rd.distortion(gt["distortion"]) : Distortion{};
        for (const json &t : rd.array(rd.require(gt, "t_cp"), "t_cp")) truth.t_cp.emplace_back(rd.vector(t, "t_cp", 3));
        for (const json &r : rd.array(rd.require(gt, "rotations"), "rotations"))
            truth.rotations.push_back(Rotation::from_axis_angle(rd.vector(r, "rotations", 3)));
        if (truth.t_cp.size() != out.observations.image_count() ||
            truth.rotations.size() != out.observations.image_count())
            rd.error("ground_truth", "ground truth must list one t_cp and one rotation per image");
        out.ground_truth = std::move(truth);
    }
    return out;
}

CameraFile parse_camera_file(const Document &doc) {
    Reader rd(doc);
    rd.header("camera");
    rd.only_keys(doc.json, {"schema_version", "kind", "units", "intrinsics", "distortion"}, "camera file");
    CameraFile out;
    out.intrinsics = rd.intrinsics(rd.require(doc.json, "intrinsics"));
    if (doc.json.contains("distortion")) out.distortion = rd.distortion(doc.json["distortion"]);
    return out;
}

RayDatabase parse_ray_database(const Document &doc) {
    Reader rd(doc);
    rd.header("ray_database");
    rd.only_keys(doc.json, {"schema_version", "kind", "units", "provenance", "rays"}, "ray database");
    RayDatabase db;
    const json &prov = rd.require(doc.json, "provenance");
    db.reference_intrinsics = rd.intrinsics(rd.require(prov, "intrinsics"));
    db.reference_distortion = prov.contains("distortion") ? rd.distortion(prov["distortion"]) : Distortion{};
    for (const json &r : rd.array(rd.require(doc.json, "rays"), "rays")) {
        const PointId id = rd.integer(rd.require(r, "id"), "id");
        const Eigen::Vector3d v = rd.vector(rd.require(r, "ray"), "ray", 3);
        if (!db.rays.emplace(id, v).second) rd.error("rays", "duplicate ray id " + std::to_string(id));
    }
    try {
        db.validate();
    } catch (const CalibrationError &e) {
        rd.error("rays", e.detail());
    }
    return db;
}

namespace {

const std::set<std::string> kConfigKeys = {"intrinsics",      "distortion",        "image_size",
                                           "target",          "radius_mm",         "target_offset_mm",
                                           "pixel_noise_sigma", "spherical_noise_sigma", "image_count",
                                           "trial_count",     "rng_seed",          "max_angle_deg",
                                           "min_visible_points", "max_resample_attempts"};

SyntheticConfig read_config(const Reader &rd, const json &root) {
    SyntheticConfig c;
    if (root.contains("intrinsics")) c.intrinsics = rd.intrinsics(root["intrinsics"]);
    if (root.contains("distortion")) c.distortion = rd.distortion(root["distortion"]);
    if (root.contains("image_size")) {
        const json &s = rd.array(root["image_size"], "image_size");
        if (s.size() != 2) rd.error("image_size", "'image_size' must be [width, height]");
        c.width = static_cast<int>(rd.integer(s[0], "image_size"));
        c.height = static_cast<int>(rd.integer(s[1], "image_size"));
    }
    if (root.contains("target")) {
        const json &t = root["target"];
        rd.only_keys(t, {"rows", "cols", "square_mm"}, "target");
        c.target.rows = static_cast<int>(rd.integer(t, "rows", c.target.rows));
        c.target.cols = static_cast<int>(rd.integer(t, "cols", c.target.cols));
        c.target.square_mm = rd.number(t, "square_mm", c.target.square_mm);
    }
    c.radius_mm = rd.number(root, "radius_mm", c.radius_mm);
    if (root.contains("target_offset_mm")) c.target_offset = rd.vector(root["target_offset_mm"], "target_offset_mm", 2);
    c.pixel_noise_sigma = rd.number(root, "pixel_noise_sigma", c.pixel_noise_sigma);
    c.spherical_noise_sigma = rd.number(root, "spherical_noise_sigma", c.spherical_noise_sigma);
    c.image_count = static_cast<int>(rd.integer(root, "image_count", c.image_count));
    c.trial_count = static_cast<int>(rd.integer(root, "trial_count", c.trial_count));
    if (root.contains("rng_seed")) {
        const json &s = root["rng_seed"];
        if (!s.is_number_unsigned()) rd.error("rng_seed", "'rng_seed' must be a non-negative integer");
        c.rng_seed = s.get<std::uint64_t>();
    }
    c.max_angle_deg = rd.number(root, "max_angle_deg", c.max_angle_deg);
    c.min_visible_points = static_cast<int>(rd.integer(root, "min_visible_points", c.min_visible_points));
    c.max_resample_attempts = static_cast<int>(rd.integer(root, "max_resample_attempts", c.max_resample_attempts));
    auto check = [&](bool ok, const std::string &key, const std::string &msg) {
        if (!ok && root.contains(key)) rd.error(key, msg);
    };
    check(c.width > 0 && c.height > 0, "image_size", "image size must be positive");
    check(c.target.rows >= 2 && c.target.cols >= 2 && c.target.square_mm > 0.0, "target",
          "target grid needs at least 2x2 points and a positive pitch");
    check(c.radius_mm > 0.0, "radius_mm", "'radius_mm' must be positive");
    check(c.pixel_noise_sigma >= 0.0, "pixel_noise_sigma", "'pixel_noise_sigma' must be non-negative");
    check(c.spherical_noise_sigma >= 0.0, "spherical_noise_sigma", "'spherical_noise_sigma' must be non-negative");
    check(c.image_count >= 1, "image_count", "'image_count' must be at least 1");
    check(c.trial_count >= 1, "trial_count", "'trial_count' must be at least 1");
    check(c.max_angle_deg >= 0.0 && c.max_angle_deg <= 90.0, "max_angle_deg", "'max_angle_deg' must be in [0, 90]");
    check(c.min_visible_points >= 4, "min_visible_points", "'min_visible_points' must be at least 4");
    check(c.max_resample_attempts >= 1, "max_resample_attempts", "'max_resample_attempts' must be at least 1");
    try {
        c.validate();
    } catch (const CalibrationError &e) {
        rd.error(root.contains("distortion") ? "distortion" : "", e.detail());
    }
    return c;
}

} // namespace

SyntheticConfig parse_synthetic_config(const Document &doc) {
    Reader rd(doc);
    rd.header("synthetic_config");
    std::set<std::string> allowed = kConfigKeys;
    allowed.insert({"schema_version", "kind", "units", "sweep_values", "solvers", "refinement"});
    rd.only_keys(doc.json, allowed, "config");
    return read_config(rd, doc.json);
}

BenchmarkFile parse_benchmark_file(const Document &doc) {
    BenchmarkFile out;
    out.config = parse_synthetic_config(doc);
    Reader rd(doc);
    const json &root = doc.json;
    if (root.contains("sweep_values"))
        for (const json &v : rd.array(root["sweep_values"], "sweep_values")) out.sweep_values.push_back(rd.number(v, "sweep_values"));
    if (root.contains("solvers")) {
        const json &s = root["solvers"];
        rd.only_keys(s, {"ours", "ours_refined", "zhang", "zhang_refined"}, "solvers");
        out.solvers.ours = rd.boolean(s, "ours", true);
        out.solvers.ours_refined = rd.boolean(s, "ours_refined", true);
        out.solvers.zhang = rd.boolean(s, "zhang", true);
        out.solvers.zhang_refined = rd.boolean(s, "zhang_refined", true);
    }
    if (root.contains("refinement")) {
        const json &r = root["refinement"];
        rd.only_keys(r, {"max_iterations", "gradient_tolerance", "parameter_tolerance", "cauchy_scale", "initial_damping"},
                     "refinement");
        RefinementConfig &c = out.refinement;
        c.max_iterations = static_cast<int>(rd.integer(r, "max_iterations", c.max_iterations));
        c.gradient_tolerance = rd.number(r, "gradient_tolerance", c.gradient_tolerance);
        c.parameter_tolerance = rd.number(r, "parameter_tolerance", c.parameter_tolerance);
        c.cauchy_scale = rd.number(r, "cauchy_scale", c.cauchy_scale);
        c.initial_damping = rd.number(r, "initial_damping", c.initial_damping);
        try {
            c.validate();
        } catch (const CalibrationError &e) {
            rd.error("refinement", e.detail());
        }
    }
    return out;
}

json to_json(const CameraIntrinsics &K) {
    return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"gamma", K.gamma}};
}

json to_json(const Distortion &d) { return {{"d1", d.d1}, {"d2", d.d2}}; }

json to_json(const SyntheticConfig &c) {
    return {{"intrinsics", to_json(c.intrinsics)},
            {"distortion", to_json(c.distortion)},
            {"image_size", {c.width, c.height}},
            {"target", {{"rows", c.target.rows}, {"cols", c.target.cols}, {"square_mm", c.target.square_mm}}},
            {"radius_mm", c.radius_mm},
            {"target_offset_mm", {c.target_offset.x(), c.target_offset.y()}},
            {"pixel_noise_sigma", c.pixel_noise_sigma},
            {"spherical_noise_sigma", c.spherical_noise_sigma},
            {"image_count", c.image_count},
            {"trial_count", c.trial_count},
            {"rng_seed", c.rng_seed},
            {"max_angle_deg", c.max_angle_deg},
            {"min_visible_points", c.min_visible_points},
            {"max_resample_attempts", c.max_resample_attempts}};
}

json to_json(const RefinementConfig &c) {
    return {{"max_iterations", c.max_iterations},     {"gradient_tolerance", c.gradient_tolerance},
            {"parameter_tolerance", c.parameter_tolerance}, {"cauchy_scale", c.cauchy_scale},
            {"initial_damping", c.initial_damping},   {"loss", c.loss == Loss::cauchy ? "cauchy" : "squared"}};
}

json observation_file_json(const ObservationSet &obs, std::pair<int, int> image_size,
                           const std::optional<GroundTruth> &truth, const json &config_echo) {
    json root = {{"schema_version", kSchemaVersion},
                 {"kind", "observations"},
                 {"units", {{"world", "mm"}, {"image", "px"}}},
                 {"image_size", {image_size.first, image_size.second}}};
    json pts = json::array();
    for (const auto &tp : obs.target().points()) pts.push_back({{"id", tp.id}, {"x", tp.x}, {"y", tp.y}});
    root["target"] = {{"points", pts}};
    json images = json::array();
    for (const auto &img : obs.images()) {
        json ip = json::array();
        for (const auto &p : img.points) ip.push_back({{"id", p.id}, {"u", p.pixel.x()}, {"v", p.pixel.y()}});
        images.push_back({{"name", img.name}, {"points", ip}});
    }
    root["images"] = images;
    if (truth) {
        json t = json::array();
        json r = json::array();
        for (const auto &v : truth->t_cp) t.push_back(vec_json(v));
        for (const auto &R : truth->rotations) r.push_back(vec_json(R.axis_angle()));
        root["ground_truth"] = {{"intrinsics", to_json(truth->intrinsics)},
                                {"distortion", to_json(truth->distortion)},
                                {"t_cp", t},
                                {"rotations", r}};
    }
    if (!config_echo.is_null()) root["config"] = config_echo;
    return root;
}

json ray_database_json(const RayDatabase &db, const std::string &source) {
    json rays = json::array();
    for (const auto &[id, v] : db.rays) rays.push_back({{"id", id}, {"ray", vec_json(v)}});
    return {{"schema_version", kSchemaVersion},
            {"kind", "ray_database"},
            {"units", {{"ray", "unit vector, reference camera frame"}}},
            {"provenance",
             {{"intrinsics", to_json(db.reference_intrinsics)},
              {"distortion", to_json(db.reference_distortion)},
              {"source", source}}},
            {"rays", rays}};
}

} // namespace collimcal::cli
