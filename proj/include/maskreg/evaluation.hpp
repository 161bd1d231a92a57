#pragma once

#include <span>
#include <string>
#include <vector>

#include "maskreg/depth_image.hpp"
#include "maskreg/geometry.hpp"
#include "maskreg/icp.hpp"
#include "maskreg/posegraph.hpp"
#include "maskreg/priors.hpp"
#include "maskreg/registrar.hpp"

namespace maskreg {

/// Geodesic angle between the two rotations, degrees.
double rotation_error_deg(const RigidTransform& estimate, const RigidTransform& truth);

/// |estimate(anchor) - truth(anchor)| in millimeters. With the default
/// anchor this is the norm of the translation difference.
double translation_error_mm(const RigidTransform& estimate, const RigidTransform& truth,
                            const Vector3& anchor = Vector3::Zero());

/// Smallest rotation error of `estimate` against truth * s over the given
/// object symmetries s (frame-A transforms; identity is always included).
double rotation_error_modulo_deg(const RigidTransform& estimate, const RigidTransform& truth,
                                 std::span<const RigidTransform> symmetries);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
/// Throws DomainError on an empty sample.
double quantile(std::vector<double> values, double q);

struct AlignmentError {
    std::string backend;
    std::size_t from = 0;
    std::size_t to = 0;
    double rotation_deg = 0.0;
    double translation_mm = 0.0;
};

struct ErrorSummary {
    std::string backend;
    std::size_t count = 0;
    double rotation_q1 = 0.0;
    double rotation_median = 0.0;
    double rotation_q3 = 0.0;
    double rotation_max = 0.0;
    double translation_q1 = 0.0;
    double translation_median = 0.0;
    double translation_q3 = 0.0;
    double translation_max = 0.0;
};

/// One summary per backend, in order of first appearance.
std::vector<ErrorSummary> summarize(std::span<const AlignmentError> errors);

std::string errors_csv(std::span<const AlignmentError> errors);
std::string summary_csv(std::span<const ErrorSummary> summaries);

/// Object points of an image in Cartesian camera coordinates.
std::vector<Vector3> cartesian_cloud(std::span<const RayPoint> cloud);

/// Both backends on each ground-truth pair (from, to) of `frames`. The
/// translation error is measured at the object centroid of frame `from`.
/// ICP starts at `icp_init` on subsampled clouds of registration.n_points.
/// Throws DomainError if a ground-truth index is out of range.
struct GroundTruthPair {
    std::size_t from = 0;
    std::size_t to = 0;
    RigidTransform transform;
};
std::vector<AlignmentError> evaluate_sequence(const std::vector<DepthImage>& frames,
                                              const std::vector<GroundTruthPair>& truth, const PriorSpec& prior,
                                              const RegistrationConfig& registration, const IcpConfig& icp_config,
                                              const RigidTransform& icp_init);

/// Registers frame k with frame k+1 for every consecutive pair, and the last
/// frame with frame 0 when close_loop is set (n > 2), then builds the pose
/// graph with dead-reckoning initial poses. Pair l uses seed
/// registration.seed + l.
PoseGraph build_sequence_graph(const std::vector<DepthImage>& frames, const PriorSpec& prior,
                               const RegistrationConfig& registration, bool close_loop);

/// All object points of every frame mapped into the world frame.
std::vector<Vector3> fuse_clouds(const std::vector<DepthImage>& frames, const std::vector<RigidTransform>& poses);

}  // namespace maskreg
