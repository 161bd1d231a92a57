#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskreg/depth_image.hpp"
#include "maskreg/icp.hpp"
#include "maskreg/posegraph.hpp"
#include "maskreg/priors.hpp"
#include "maskreg/registrar.hpp"
#include "maskreg/synth.hpp"

namespace maskreg {

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// MRD1 depth images: one text header line
//   MRD1 <width> <height> <focal> <cx> <cy> <sigma> <r_min>
// followed by width*height records of 1 state byte and a little-endian
// float32 depth in meters (0 for UNKNOWN), row-major.

/// Throws DomainError if the camera noise is not isotropic.
void write_mrd(std::ostream& out, const DepthImage& img);
void write_mrd(const std::filesystem::path& path, const DepthImage& img);
/// Throws DomainError on a malformed header or payload, IoError on I/O
/// failure.
DepthImage read_mrd(std::istream& in);
DepthImage read_mrd(const std::filesystem::path& path);

/// Shortest decimal that round-trips the double (up to 17 digits).
std::string format_double(double x);

/// Row "w1 w2 w3 t1 t2 t3" style list of log6 coordinates.
std::string format_tangent(const Vector6& v, char sep);

// Pose graph text files, one record per line ('#' starts a comment):
//   NODE <id> <log6 of pose, 6 values>
//   EDGE <from> <to> <log6 of measurement, 6 values> <21 upper-triangular
//        information entries, row-major>
void write_graph(std::ostream& out, const PoseGraph& graph);
void write_graph(const std::filesystem::path& path, const PoseGraph& graph);
PoseGraph read_graph(std::istream& in);
PoseGraph read_graph(const std::filesystem::path& path);

/// NODE lines only.
void write_poses(const std::filesystem::path& path, const std::vector<std::size_t>& ids,
                 const std::vector<RigidTransform>& poses);

/// "x y z" per line.
void write_xyz(const std::filesystem::path& path, const std::vector<Vector3>& points);

/// Relative ground truth, one CSV row "from,to,w1,w2,w3,t1,t2,t3" per pair
/// under a header line.
struct GroundTruthRow {
    std::size_t from = 0;
    std::size_t to = 0;
    RigidTransform transform;
};
void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruthRow>& rows);
std::vector<GroundTruthRow> read_ground_truth(const std::filesystem::path& path);

/// Deterministic JSON report (no timing).
std::string posterior_report_json(const TransformPosterior& post);
std::string icp_report_json(const IcpResult& res);

/// "log_weight,weight,w1,w2,w3,t1,t2,t3" per surviving sample.
void write_samples_csv(const std::filesystem::path& path, const TransformPosterior& post);

/// Synthetic sequence description for the `synth` command.
struct SceneConfig {
    std::optional<TabletopObject> object = TabletopObject::Box;  // nullopt: empty scene
    bool table = true;
    int frames = 14;
    double yaw_step = 2.0 * M_PI / 14.0;  // radians per step
    double shift = 0.01;                  // meters per step
    double sigma = 0.002;                 // render noise on r
    CameraModel camera = default_camera();

    /// The scene of frame 0.
    SceneSpec scene() const;
    std::vector<RigidTransform> motions() const;
};

/// Everything a CLI run reads from its JSON config file. Relative paths are
/// resolved against the config file's directory.
struct RunConfig {
    SceneConfig scene;
    std::vector<std::filesystem::path> images;
    std::optional<std::filesystem::path> ground_truth;
    std::optional<std::filesystem::path> graph;
    std::optional<std::filesystem::path> samples_csv;
    PriorSpec prior;
    RegistrationConfig registration;
    IcpConfig icp;
    RigidTransform icp_init;
    OptimizerConfig optimizer;
    bool close_loop = true;
};

/// Default prior for the synthetic table rig: PLANAR about the table normal.
PriorSpec tabletop_prior();

/// Throws DomainError on unknown keys or invalid values.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
/// Throws IoError if the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace maskreg
