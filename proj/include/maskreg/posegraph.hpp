#pragma once

#include <cstddef>
#include <vector>

#include "maskreg/geometry.hpp"

namespace maskreg {

/// Pose of frame `id` in the world frame: p_world = pose * p_frame.
struct PoseNode {
    std::size_t id = 0;
    RigidTransform pose;
};

/// Relative constraint Z ~= X_from^-1 * X_to, i.e. Z maps points of frame
/// `to` into frame `from`.
struct PoseEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    RigidTransform measurement;
    Matrix6 information = Matrix6::Identity();
};

/// Nodes are kept in insertion order; the first node is the gauge and stays
/// fixed during optimization.
class PoseGraph {
public:
    /// Throws DomainError on a duplicate id.
    void add_node(std::size_t id, const RigidTransform& pose);
    /// Throws DomainError on unknown endpoints, a self loop or an information
    /// matrix that is not symmetric positive definite.
    void add_edge(const PoseEdge& edge);

    const std::vector<PoseNode>& nodes() const { return nodes_; }
    const std::vector<PoseEdge>& edges() const { return edges_; }

    /// Position of `id` in nodes(); throws DomainError if absent.
    std::size_t index_of(std::size_t id) const;
    bool connected() const;

private:
    std::vector<PoseNode> nodes_;
    std::vector<PoseEdge> edges_;
};

/// log6(Z^-1 * X_from^-1 * X_to). Throws DomainError when the residual
/// rotation reaches pi.
Vector6 edge_residual(const PoseEdge& edge, const RigidTransform& x_from, const RigidTransform& x_to);

/// Jacobians of edge_residual with respect to right perturbations
/// X <- X * exp6(d) of each endpoint.
struct EdgeJacobians {
    Eigen::Matrix<double, 6, 6> d_from;
    Eigen::Matrix<double, 6, 6> d_to;
};
EdgeJacobians edge_jacobians(const PoseEdge& edge, const RigidTransform& x_from, const RigidTransform& x_to);

/// Eigenvalue-floored inverse V diag(1 / max(lambda, floor)) V^T of a
/// symmetric covariance.
Matrix6 information_from_covariance(const Matrix6& covariance, double floor = 1e-8);

/// Edge between consecutive frames from a registration result: T maps
/// points of frame `from` into frame `to` and `covariance` lives in the
/// tangent space at T.
PoseEdge edge_from_registration(std::size_t from, std::size_t to, const RigidTransform& T,
                                const Matrix6& covariance, double floor = 1e-8);

/// Sum over edges of r^T Omega r at the given poses (parallel to nodes()).
double graph_chi2(const PoseGraph& graph, const std::vector<RigidTransform>& poses);

/// sqrt(r^T Omega r) for one edge.
double edge_mahalanobis(const PoseEdge& edge, const RigidTransform& x_from, const RigidTransform& x_to);

struct OptimizerConfig {
    int max_iter = 100;
    double tol = 1e-12;        // on |delta chi2|
    double damping = 1e-4;     // initial Levenberg-Marquardt lambda

    void validate() const;
};

struct OptimizationResult {
    std::vector<RigidTransform> poses;  // parallel to graph.nodes()
    std::vector<double> chi2_trace;     // initial value, then each accepted step
    int iterations = 0;
    bool converged = false;

    double initial_chi2() const { return chi2_trace.front(); }
    double final_chi2() const { return chi2_trace.back(); }
};

/// Levenberg-Marquardt on the sum of squared Mahalanobis edge residuals with
/// right-multiplied tangent updates. Throws DomainError on an empty or
/// disconnected graph, NumericalError on singular normal equations.
OptimizationResult optimize(const PoseGraph& graph, const OptimizerConfig& config = {});

/// Poses obtained by composing edge measurements along a spanning tree
/// rooted at the first node, visiting edges in insertion order.
std::vector<RigidTransform> dead_reckoning(const PoseGraph& graph);

}  // namespace maskreg
