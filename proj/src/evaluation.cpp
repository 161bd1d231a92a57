#include "maskreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "maskreg/io.hpp"

namespace maskreg {

double rotation_error_deg(const RigidTransform& estimate, const RigidTransform& truth) {
    return rotation_angle(truth.rotation().transpose() * estimate.rotation()) * 180.0 / M_PI;
}

double translation_error_mm(const RigidTransform& estimate, const RigidTransform& truth, const Vector3& anchor) {
    return (estimate * anchor - truth * anchor).norm() * 1e3;
}

double rotation_error_modulo_deg(const RigidTransform& estimate, const RigidTransform& truth,
                                 std::span<const RigidTransform> symmetries) {
    double best = rotation_error_deg(estimate, truth);
    for (const RigidTransform& s : symmetries) {
        best = std::min(best, rotation_error_deg(estimate, truth * s));
    }
    return best;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw DomainError("quantile: empty sample");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw DomainError("quantile: q must be in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<ErrorSummary> summarize(std::span<const AlignmentError> errors) {
    std::vector<std::string> order;
    for (const AlignmentError& e : errors) {
        if (std::find(order.begin(), order.end(), e.backend) == order.end()) {
            order.push_back(e.backend);
        }
    }
    std::vector<ErrorSummary> out;
    for (const std::string& name : order) {
        std::vector<double> rot;
        std::vector<double> tr;
        for (const AlignmentError& e : errors) {
            if (e.backend == name) {
                rot.push_back(e.rotation_deg);
                tr.push_back(e.translation_mm);
            }
        }
        ErrorSummary s;
        s.backend = name;
        s.count = rot.size();
        s.rotation_q1 = quantile(rot, 0.25);
        s.rotation_median = quantile(rot, 0.5);
        s.rotation_q3 = quantile(rot, 0.75);
        s.rotation_max = quantile(rot, 1.0);
        s.translation_q1 = quantile(tr, 0.25);
        s.translation_median = quantile(tr, 0.5);
        s.translation_q3 = quantile(tr, 0.75);
        s.translation_max = quantile(tr, 1.0);
        out.push_back(s);
    }
    return out;
}

std::string errors_csv(std::span<const AlignmentError> errors) {
    std::ostringstream os;
    os << "backend,from,to,rotation_deg,translation_mm\n";
    for (const AlignmentError& e : errors) {
        os << e.backend << ',' << e.from << ',' << e.to << ',' << format_double(e.rotation_deg) << ','
           << format_double(e.translation_mm) << '\n';
    }
    return os.str();
}

std::string summary_csv(std::span<const ErrorSummary> summaries) {
    std::ostringstream os;
    os << "backend,count,rotation_q1,rotation_median,rotation_q3,rotation_max,"
          "translation_q1,translation_median,translation_q3,translation_max\n";
    for (const ErrorSummary& s : summaries) {
        os << s.backend << ',' << s.count;
        for (double v : {s.rotation_q1, s.rotation_median, s.rotation_q3, s.rotation_max, s.translation_q1,
                         s.translation_median, s.translation_q3, s.translation_max}) {
            os << ',' << format_double(v);
        }
        os << '\n';
    }
    return os.str();
}

std::vector<Vector3> cartesian_cloud(std::span<const RayPoint> cloud) {
    std::vector<Vector3> out;
    out.reserve(cloud.size());
    for (const RayPoint& q : cloud) {
        out.push_back(from_ray(q));
    }
    return out;
}

std::vector<AlignmentError> evaluate_sequence(const std::vector<DepthImage>& frames,
                                              const std::vector<GroundTruthPair>& truth, const PriorSpec& prior,
                                              const RegistrationConfig& registration, const IcpConfig& icp_config,
                                              const RigidTransform& icp_init) {
    std::vector<AlignmentError> reg_errors;
    std::vector<AlignmentError> icp_errors;
    for (std::size_t l = 0; l < truth.size(); ++l) {
        const GroundTruthPair& gt = truth[l];
        if (gt.from >= frames.size() || gt.to >= frames.size()) {
            throw DomainError("evaluate_sequence: ground truth refers to a missing frame");
        }
        const DepthImage& a = frames[gt.from];
        const DepthImage& b = frames[gt.to];
        const Vector3 anchor = cloud_centroid(a.object_points());

        RegistrationConfig rc = registration;
        rc.seed = registration.seed + l;
        const TransformPosterior post = register_pair(a, b, prior, rc);
        reg_errors.push_back({"maskreg", gt.from, gt.to, rotation_error_deg(post.mean, gt.transform),
                              translation_error_mm(post.mean, gt.transform, anchor)});

        const auto pa = cartesian_cloud(subsample_object(a, registration.n_points, rc.seed));
        const auto pb = cartesian_cloud(subsample_object(b, registration.n_points, ~rc.seed));
        const IcpResult res = icp(pa, pb, icp_init, icp_config);
        icp_errors.push_back({"icp", gt.from, gt.to, rotation_error_deg(res.transform, gt.transform),
                              translation_error_mm(res.transform, gt.transform, anchor)});
    }
    reg_errors.insert(reg_errors.end(), icp_errors.begin(), icp_errors.end());
    return reg_errors;
}

PoseGraph build_sequence_graph(const std::vector<DepthImage>& frames, const PriorSpec& prior,
                               const RegistrationConfig& registration, bool close_loop) {
    if (frames.empty()) {
        throw DomainError("build_sequence_graph: no frames");
    }
    const std::size_t n = frames.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        pairs.emplace_back(k, k + 1);
    }
    if (close_loop && n > 2) {
        pairs.emplace_back(n - 1, 0);
    }
    std::vector<PoseEdge> edges;
    for (std::size_t l = 0; l < pairs.size(); ++l) {
        RegistrationConfig rc = registration;
        rc.seed = registration.seed + l;
        const auto [a, b] = pairs[l];
        const TransformPosterior post = register_pair(frames[a], frames[b], prior, rc);
        edges.push_back(edge_from_registration(a, b, post.mean, post.covariance));
    }
    // initial poses by dead reckoning along the chain
    std::vector<RigidTransform> poses(n);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        poses[k + 1] = poses[k] * edges[k].measurement;
    }
    PoseGraph g;
    for (std::size_t k = 0; k < n; ++k) {
        g.add_node(k, poses[k]);
    }
    for (const PoseEdge& e : edges) {
        g.add_edge(e);
    }
    return g;
}

std::vector<Vector3> fuse_clouds(const std::vector<DepthImage>& frames, const std::vector<RigidTransform>& poses) {
    if (frames.size() != poses.size()) {
        throw DomainError("fuse_clouds: frames and poses differ in length");
    }
    std::vector<Vector3> out;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        for (const RayPoint& q : frames[k].object_points()) {
            out.push_back(poses[k] * from_ray(q));
        }
    }
    return out;
}

}  // namespace maskreg
