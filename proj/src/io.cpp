#include "maskreg/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace maskreg {

namespace {

using nlohmann::json;

constexpr const char* kMrdMagic = "MRD1";

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary | std::ios::in : std::ios::in);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    return in;
}

void finish(std::ostream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

double parse_double(const std::string& tok, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw DomainError(std::string(what) + ": bad number '" + tok + "'");
    }
    return v;
}

std::size_t parse_index(const std::string& tok, const char* what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw DomainError(std::string(what) + ": bad integer '" + tok + "'");
    }
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    if (sep == ' ') {
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            out.push_back(tok);
        }
        return out;
    }
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

Vector6 parse_tangent(const std::vector<std::string>& tok, std::size_t first, const char* what) {
    Vector6 v;
    for (int i = 0; i < 6; ++i) {
        v[i] = parse_double(tok[first + static_cast<std::size_t>(i)], what);
    }
    return v;
}

json tangent_json(const Vector6& v) {
    json a = json::array();
    for (int i = 0; i < 6; ++i) {
        a.push_back(v[i]);
    }
    return a;
}

json matrix_json(const Matrix6& m) {
    json rows = json::array();
    for (int i = 0; i < 6; ++i) {
        json row = json::array();
        for (int j = 0; j < 6; ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

// json helpers that turn every parse problem into a DomainError

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw DomainError(std::string("config: '") + where + "' must be an object");
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
        if (!ok.count(item.key())) {
            throw DomainError(std::string("config: unknown key '") + item.key() + "' in " + where);
        }
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw DomainError(std::string("config: key '") + key + "' has the wrong type");
    }
}

double number_or(const json& obj, const char* key, double fallback) {
    if (obj.contains(key) && !obj.at(key).is_number()) {
        throw DomainError(std::string("config: key '") + key + "' must be a number");
    }
    const double v = get_or<double>(obj, key, fallback);
    if (!std::isfinite(v)) {
        throw DomainError(std::string("config: key '") + key + "' must be finite");
    }
    return v;
}

std::uint64_t unsigned_or(const json& obj, const char* key, std::uint64_t fallback) {
    if (obj.contains(key) && !obj.at(key).is_number_unsigned()) {
        throw DomainError(std::string("config: key '") + key + "' must be a non-negative integer");
    }
    return get_or<std::uint64_t>(obj, key, fallback);
}

Vector3 vec3_or(const json& obj, const char* key, const Vector3& fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    const json& a = obj.at(key);
    if (!a.is_array() || a.size() != 3) {
        throw DomainError(std::string("config: '") + key + "' must be a 3-vector");
    }
    Vector3 v;
    for (int i = 0; i < 3; ++i) {
        if (!a[static_cast<std::size_t>(i)].is_number()) {
            throw DomainError(std::string("config: '") + key + "' must hold numbers");
        }
        v[i] = a[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

Vector6 vec6(const json& a, const char* key) {
    if (!a.is_array() || a.size() != 6) {
        throw DomainError(std::string("config: '") + key + "' must be a 6-vector");
    }
    Vector6 v;
    for (int i = 0; i < 6; ++i) {
        if (!a[static_cast<std::size_t>(i)].is_number()) {
            throw DomainError(std::string("config: '") + key + "' must hold numbers");
        }
        v[i] = a[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const json& v, const char* key) {
    if (!v.is_string()) {
        throw DomainError(std::string("config: '") + key + "' must be a path string");
    }
    const std::filesystem::path p = v.get<std::string>();
    return p.is_absolute() || base.empty() ? p : base / p;
}

TabletopObject parse_object(const std::string& name) {
    if (name == "box") return TabletopObject::Box;
    if (name == "tube") return TabletopObject::Tube;
    if (name == "flashlight") return TabletopObject::Flashlight;
    if (name == "square_box") return TabletopObject::SquareBox;
    throw DomainError("config: unknown object '" + name + "'");
}

constexpr double kDeg = M_PI / 180.0;

PriorSpec parse_prior(const json& p) {
    check_keys(p, "prior", {"type", "max_shift", "max_angle_deg", "max_yaw_deg", "normal", "point", "mean",
                            "covariance"});
    const std::string type = get_or<std::string>(p, "type", "planar");
    PriorSpec spec;
    if (type == "bounded6dof") {
        Bounded6DofPrior b;
        b.max_shift = number_or(p, "max_shift", b.max_shift);
        b.max_angle = number_or(p, "max_angle_deg", b.max_angle / kDeg) * kDeg;
        spec.params = b;
    } else if (type == "planar") {
        PlanarPrior pl = std::get<PlanarPrior>(tabletop_prior().params);
        pl.max_shift = number_or(p, "max_shift", pl.max_shift);
        pl.max_yaw = number_or(p, "max_yaw_deg", pl.max_yaw / kDeg) * kDeg;
        pl.normal = vec3_or(p, "normal", pl.normal);
        pl.plane_point = vec3_or(p, "point", pl.plane_point);
        if (pl.normal.norm() > 0.0) {
            pl.normal.normalize();
        }
        spec.params = pl;
    } else if (type == "gaussian") {
        GaussianPrior g;
        if (p.contains("mean")) {
            g.mean = vec6(p.at("mean"), "mean");
        }
        if (p.contains("covariance")) {
            const json& c = p.at("covariance");
            if (!c.is_array() || c.size() != 6) {
                throw DomainError("config: 'covariance' must be 6x6");
            }
            for (std::size_t i = 0; i < 6; ++i) {
                g.covariance.row(static_cast<Eigen::Index>(i)) = vec6(c[i], "covariance").transpose();
            }
        }
        spec.params = g;
    } else {
        throw DomainError("config: unknown prior type '" + type + "'");
    }
    spec.validate();
    return spec;
}

}  // namespace

std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc()) {
        throw NumericalError("format_double: conversion failed");
    }
    return std::string(buf.data(), ptr);
}

std::string format_tangent(const Vector6& v, char sep) {
    std::string s;
    for (int i = 0; i < 6; ++i) {
        if (i > 0) {
            s += sep;
        }
        s += format_double(v[i]);
    }
    return s;
}

// ---------------------------------------------------------------- MRD

void write_mrd(std::ostream& out, const DepthImage& img) {
    const CameraModel& cam = img.camera();
    const auto sigma = cam.isotropic_sigma();
    if (!sigma) {
        throw DomainError("write_mrd: camera noise must be isotropic");
    }
    out << kMrdMagic << ' ' << cam.width << ' ' << cam.height << ' ' << format_double(cam.focal) << ' '
        << format_double(cam.cx) << ' ' << format_double(cam.cy) << ' ' << format_double(*sigma) << ' '
        << format_double(cam.r_min) << '\n';
    std::vector<char> payload(img.grid().size() * 5);
    for (std::size_t i = 0; i < img.grid().size(); ++i) {
        const PixelObservation& px = img.grid()[i];
        const float d = px.measured() ? static_cast<float>(px.depth) : 0.0f;
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(d);
        char* rec = payload.data() + 5 * i;
        rec[0] = static_cast<char>(px.state);
        for (int b = 0; b < 4; ++b) {
            rec[1 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

void write_mrd(const std::filesystem::path& path, const DepthImage& img) {
    auto out = open_out(path, true);
    write_mrd(out, img);
    finish(out, path);
}

DepthImage read_mrd(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) {
        throw DomainError("mrd: missing header");
    }
    const auto tok = split(header, ' ');
    if (tok.size() != 8 || tok[0] != kMrdMagic) {
        throw DomainError("mrd: bad header, expected 'MRD1 width height focal cx cy sigma r_min'");
    }
    const std::size_t width = parse_index(tok[1], "mrd width");
    const std::size_t height = parse_index(tok[2], "mrd height");
    if (width == 0 || height == 0 || width > 100000 || height > 100000) {
        throw DomainError("mrd: image dimensions out of range");
    }
    CameraModel cam;
    cam.width = static_cast<int>(width);
    cam.height = static_cast<int>(height);
    cam.focal = parse_double(tok[3], "mrd focal");
    cam.cx = parse_double(tok[4], "mrd cx");
    cam.cy = parse_double(tok[5], "mrd cy");
    const double sigma = parse_double(tok[6], "mrd sigma");
    cam.r_min = parse_double(tok[7], "mrd r_min");
    cam.noise = Matrix3::Identity() * (sigma * sigma);
    if (!(sigma > 0.0)) {
        throw DomainError("mrd: sigma must be positive");
    }
    cam.validate();

    const std::size_t n = width * height;
    std::vector<char> payload(n * 5);
    in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw DomainError("mrd: payload shorter than width*height*5 bytes");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DomainError("mrd: trailing bytes after payload");
    }
    std::vector<PixelObservation> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto* rec = reinterpret_cast<const unsigned char*>(payload.data() + 5 * i);
        if (rec[0] > 2) {
            throw DomainError("mrd: invalid pixel state " + std::to_string(rec[0]));
        }
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(rec[1 + b]) << (8 * b);
        }
        grid[i].state = static_cast<PixelState>(rec[0]);
        grid[i].depth = static_cast<double>(std::bit_cast<float>(bits));
    }
    return DepthImage(cam, std::move(grid));
}

DepthImage read_mrd(const std::filesystem::path& path) {
    auto in = open_in(path, true);
    try {
        return read_mrd(in);
    } catch (const DomainError& e) {
        throw DomainError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- graphs

void write_graph(std::ostream& out, const PoseGraph& graph) {
    for (const PoseNode& n : graph.nodes()) {
        out << "NODE " << n.id << ' ' << format_tangent(log6(n.pose), ' ') << '\n';
    }
    for (const PoseEdge& e : graph.edges()) {
        out << "EDGE " << e.from << ' ' << e.to << ' ' << format_tangent(log6(e.measurement), ' ');
        for (int i = 0; i < 6; ++i) {
            for (int j = i; j < 6; ++j) {
                out << ' ' << format_double(e.information(i, j));
            }
        }
        out << '\n';
    }
}

void write_graph(const std::filesystem::path& path, const PoseGraph& graph) {
    auto out = open_out(path);
    write_graph(out, graph);
    finish(out, path);
}

PoseGraph read_graph(std::istream& in) {
    PoseGraph g;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        const auto tok = split(line, ' ');
        if (tok.empty()) {
            continue;
        }
        const std::string where = "graph line " + std::to_string(line_no);
        if (tok[0] == "NODE") {
            if (tok.size() != 8) {
                throw DomainError(where + ": NODE needs an id and 6 values");
            }
            g.add_node(parse_index(tok[1], "node id"), exp6(parse_tangent(tok, 2, "node pose")));
        } else if (tok[0] == "EDGE") {
            if (tok.size() != 3 + 6 + 21) {
                throw DomainError(where + ": EDGE needs 2 ids, 6 measurement and 21 information values");
            }
            PoseEdge e;
            e.from = parse_index(tok[1], "edge from");
            e.to = parse_index(tok[2], "edge to");
            e.measurement = exp6(parse_tangent(tok, 3, "edge measurement"));
            std::size_t k = 9;
            for (int i = 0; i < 6; ++i) {
                for (int j = i; j < 6; ++j) {
                    e.information(i, j) = e.information(j, i) = parse_double(tok[k++], "edge information");
                }
            }
            g.add_edge(e);
        } else {
            throw DomainError(where + ": unknown record '" + tok[0] + "'");
        }
    }
    return g;
}

PoseGraph read_graph(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return read_graph(in);
    } catch (const DomainError& e) {
        throw DomainError(path.string() + ": " + e.what());
    }
}

void write_poses(const std::filesystem::path& path, const std::vector<std::size_t>& ids,
                 const std::vector<RigidTransform>& poses) {
    if (ids.size() != poses.size()) {
        throw DomainError("write_poses: ids and poses differ in length");
    }
    auto out = open_out(path);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << "NODE " << ids[i] << ' ' << format_tangent(log6(poses[i]), ' ') << '\n';
    }
    finish(out, path);
}

void write_xyz(const std::filesystem::path& path, const std::vector<Vector3>& points) {
    auto out = open_out(path);
    for (const Vector3& p : points) {
        out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
    }
    finish(out, path);
}

// ---------------------------------------------------------------- ground truth

void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruthRow>& rows) {
    auto out = open_out(path);
    out << "from,to,w1,w2,w3,t1,t2,t3\n";
    for (const GroundTruthRow& r : rows) {
        out << r.from << ',' << r.to << ',' << format_tangent(log6(r.transform), ',') << '\n';
    }
    finish(out, path);
}

std::vector<GroundTruthRow> read_ground_truth(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw DomainError(path.string() + ": empty ground-truth file");
    }
    std::vector<GroundTruthRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto tok = split(line, ',');
        if (tok.size() != 8) {
            throw DomainError(path.string() + " line " + std::to_string(line_no) + ": expected 8 fields");
        }
        rows.push_back({parse_index(tok[0], "gt from"), parse_index(tok[1], "gt to"),
                        exp6(parse_tangent(tok, 2, "gt transform"))});
    }
    return rows;
}

// ---------------------------------------------------------------- reports

std::string posterior_report_json(const TransformPosterior& post) {
    json j;
    j["mean"] = tangent_json(log6(post.mean));
    j["covariance"] = matrix_json(post.covariance);
    j["effective_sample_size"] = post.effective_sample_size;
    j["evaluated_count"] = post.evaluated_count;
    j["rejected_count"] = post.rejected_count;
    j["surviving_count"] = post.samples.size();
    return j.dump(2) + "\n";
}

std::string icp_report_json(const IcpResult& res) {
    json j;
    j["transform"] = tangent_json(log6(res.transform));
    j["rms"] = res.rms;
    j["iterations"] = res.iterations;
    j["converged"] = res.converged;
    return j.dump(2) + "\n";
}

void write_samples_csv(const std::filesystem::path& path, const TransformPosterior& post) {
    auto out = open_out(path);
    out << "log_weight,weight,w1,w2,w3,t1,t2,t3\n";
    for (std::size_t i = 0; i < post.samples.size(); ++i) {
        out << format_double(post.samples[i].log_weight) << ',' << format_double(post.weights[i]) << ','
            << format_tangent(log6(post.samples[i].transform), ',') << '\n';
    }
    finish(out, path);
}

// ---------------------------------------------------------------- configs

SceneSpec SceneConfig::scene() const {
    SceneSpec s = tabletop_scene(object.value_or(TabletopObject::Box));
    if (!object) {
        s.object.clear();
    }
    if (!table) {
        s.table.reset();
    }
    return s;
}

std::vector<RigidTransform> SceneConfig::motions() const {
    if (frames < 1) {
        throw DomainError("scene: frames must be >= 1");
    }
    SceneSpec s = tabletop_scene(object.value_or(TabletopObject::Box));
    return tabletop_motions(s, frames - 1, yaw_step, shift);
}

PriorSpec tabletop_prior() {
    const SceneSpec s = tabletop_scene(TabletopObject::Box);
    PlanarPrior p;
    p.normal = s.table->normal;
    p.plane_point = s.table->point;
    return {p};
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DomainError(std::string("config: ") + e.what());
    }
    check_keys(root, "config", {"scene", "images", "ground_truth", "graph", "samples_csv", "prior",
                                "registration", "icp", "optimizer", "close_loop"});
    RunConfig cfg;
    cfg.prior = tabletop_prior();

    if (root.contains("scene")) {
        const json& s = root.at("scene");
        check_keys(s, "scene", {"object", "table", "frames", "yaw_step_deg", "shift", "sigma", "camera"});
        const std::string obj = get_or<std::string>(s, "object", "box");
        cfg.scene.object = obj == "none" ? std::nullopt : std::optional(parse_object(obj));
        cfg.scene.table = get_or<bool>(s, "table", true);
        cfg.scene.frames = static_cast<int>(unsigned_or(s, "frames", 14));
        cfg.scene.yaw_step = number_or(s, "yaw_step_deg", cfg.scene.yaw_step / kDeg) * kDeg;
        cfg.scene.shift = number_or(s, "shift", cfg.scene.shift);
        cfg.scene.sigma = number_or(s, "sigma", cfg.scene.sigma);
        if (cfg.scene.frames < 1 || !(cfg.scene.sigma >= 0.0)) {
            throw DomainError("config: scene needs frames >= 1 and sigma >= 0");
        }
        if (s.contains("camera")) {
            const json& c = s.at("camera");
            check_keys(c, "camera", {"width", "height", "focal", "sigma", "r_min"});
            const CameraModel d = default_camera();
            cfg.scene.camera = CameraModel::isotropic(
                static_cast<int>(unsigned_or(c, "width", static_cast<std::uint64_t>(d.width))),
                static_cast<int>(unsigned_or(c, "height", static_cast<std::uint64_t>(d.height))),
                number_or(c, "focal", d.focal), number_or(c, "sigma", *d.isotropic_sigma()),
                number_or(c, "r_min", d.r_min));
            cfg.scene.camera.validate();
        }
    }
    if (root.contains("images")) {
        const json& a = root.at("images");
        if (!a.is_array()) {
            throw DomainError("config: 'images' must be a list of paths");
        }
        for (const json& p : a) {
            cfg.images.push_back(resolve(base_dir, p, "images"));
        }
    }
    if (root.contains("ground_truth")) {
        cfg.ground_truth = resolve(base_dir, root.at("ground_truth"), "ground_truth");
    }
    if (root.contains("graph")) {
        cfg.graph = resolve(base_dir, root.at("graph"), "graph");
    }
    if (root.contains("samples_csv")) {
        cfg.samples_csv = resolve(base_dir, root.at("samples_csv"), "samples_csv");
    }
    if (root.contains("prior")) {
        cfg.prior = parse_prior(root.at("prior"));
    }
    if (root.contains("registration")) {
        const json& r = root.at("registration");
        check_keys(r, "registration",
                   {"samples", "points", "seed", "threads", "window_radius", "reject_floor", "unknown"});
        RegistrationConfig& rc = cfg.registration;
        rc.n_samples = unsigned_or(r, "samples", rc.n_samples);
        rc.n_points = unsigned_or(r, "points", rc.n_points);
        rc.seed = unsigned_or(r, "seed", rc.seed);
        rc.threads = static_cast<unsigned>(unsigned_or(r, "threads", rc.threads));
        rc.likelihood.window_radius = number_or(r, "window_radius", rc.likelihood.window_radius);
        rc.likelihood.reject_floor = number_or(r, "reject_floor", rc.likelihood.reject_floor);
        const std::string unknown = get_or<std::string>(r, "unknown", "free_space");
        if (unknown == "free_space") {
            rc.likelihood.unknown = UnknownPolicy::FreeSpace;
        } else if (unknown == "ignore") {
            rc.likelihood.unknown = UnknownPolicy::Ignore;
        } else {
            throw DomainError("config: 'unknown' must be free_space or ignore");
        }
    }
    cfg.registration.validate();
    if (root.contains("icp")) {
        const json& i = root.at("icp");
        check_keys(i, "icp", {"max_iter", "tol", "max_corr_dist", "init"});
        cfg.icp.max_iter = static_cast<int>(unsigned_or(i, "max_iter", static_cast<std::uint64_t>(cfg.icp.max_iter)));
        cfg.icp.tol = number_or(i, "tol", cfg.icp.tol);
        cfg.icp.max_corr_dist = number_or(i, "max_corr_dist", cfg.icp.max_corr_dist);
        if (i.contains("init")) {
            cfg.icp_init = exp6(vec6(i.at("init"), "init"));
        }
    }
    cfg.icp.validate();
    if (root.contains("optimizer")) {
        const json& o = root.at("optimizer");
        check_keys(o, "optimizer", {"max_iter", "tol", "damping"});
        cfg.optimizer.max_iter =
            static_cast<int>(unsigned_or(o, "max_iter", static_cast<std::uint64_t>(cfg.optimizer.max_iter)));
        cfg.optimizer.tol = number_or(o, "tol", cfg.optimizer.tol);
        cfg.optimizer.damping = number_or(o, "damping", cfg.optimizer.damping);
    }
    cfg.optimizer.validate();
    cfg.close_loop = get_or<bool>(root, "close_loop", true);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace maskreg
