#include "maskreg/posegraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace maskreg {

namespace {

bool is_spd(const Matrix6& m) {
    if (!m.allFinite()) {
        return false;
    }
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        return false;
    }
    Eigen::LLT<Matrix6> llt(0.5 * (m + m.transpose()));
    return llt.info() == Eigen::Success;
}

std::vector<std::vector<std::size_t>> adjacency(const PoseGraph& g) {
    std::vector<std::vector<std::size_t>> adj(g.nodes().size());
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        adj[g.index_of(g.edges()[e].from)].push_back(e);
        adj[g.index_of(g.edges()[e].to)].push_back(e);
    }
    return adj;
}

}  // namespace

void PoseGraph::add_node(std::size_t id, const RigidTransform& pose) {
    for (const PoseNode& n : nodes_) {
        if (n.id == id) {
            throw DomainError("posegraph: duplicate node id " + std::to_string(id));
        }
    }
    nodes_.push_back({id, pose});
}

void PoseGraph::add_edge(const PoseEdge& edge) {
    index_of(edge.from);
    index_of(edge.to);
    if (edge.from == edge.to) {
        throw DomainError("posegraph: self loop on node " + std::to_string(edge.from));
    }
    if (!is_spd(edge.information)) {
        throw DomainError("posegraph: edge information must be symmetric positive definite");
    }
    PoseEdge e = edge;
    e.information = 0.5 * (edge.information + edge.information.transpose());
    edges_.push_back(e);
}

std::size_t PoseGraph::index_of(std::size_t id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].id == id) {
            return i;
        }
    }
    throw DomainError("posegraph: unknown node id " + std::to_string(id));
}

bool PoseGraph::connected() const {
    if (nodes_.empty()) {
        return false;
    }
    const auto adj = adjacency(*this);
    std::vector<bool> seen(nodes_.size(), false);
    std::queue<std::size_t> todo;
    todo.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!todo.empty()) {
        const std::size_t k = todo.front();
        todo.pop();
        for (std::size_t e : adj[k]) {
            const std::size_t a = index_of(edges_[e].from);
            const std::size_t b = index_of(edges_[e].to);
            const std::size_t other = a == k ? b : a;
            if (!seen[other]) {
                seen[other] = true;
                ++count;
                todo.push(other);
            }
        }
    }
    return count == nodes_.size();
}

Vector6 edge_residual(const PoseEdge& edge, const RigidTransform& x_from, const RigidTransform& x_to) {
    return log6(edge.measurement.inverse() * x_from.inverse() * x_to);
}

EdgeJacobians edge_jacobians(const PoseEdge& edge, const RigidTransform& x_from, const RigidTransform& x_to) {
    const Matrix3& Ri = x_from.rotation();
    const Matrix3& Rj = x_to.rotation();
    const Matrix3 RzT = edge.measurement.rotation().transpose();
    const Matrix3 Re = RzT * Ri.transpose() * Rj;
    const Vector3 phi = so3_log(Re);
    const Matrix3 Jinv = so3_right_jacobian_inverse(phi);
    const Vector3 v = Ri.transpose() * (x_to.translation() - x_from.translation());

    EdgeJacobians J;
    J.d_from.setZero();
    J.d_to.setZero();
    J.d_from.block<3, 3>(0, 0) = -Jinv * Rj.transpose() * Ri;
    J.d_from.block<3, 3>(3, 0) = RzT * skew(v);
    J.d_from.block<3, 3>(3, 3) = -RzT;
    J.d_to.block<3, 3>(0, 0) = Jinv;
    J.d_to.block<3, 3>(3, 3) = Re;
    return J;
}

Matrix6 information_from_covariance(const Matrix6& covariance, double floor) {
    if (!covariance.allFinite()) {
        throw DomainError("information_from_covariance: non-finite covariance");
    }
    if (!(floor > 0.0)) {
        throw DomainError("information_from_covariance: floor must be positive");
    }
    Eigen::SelfAdjointEigenSolver<Matrix6> eig(0.5 * (covariance + covariance.transpose()));
    Vector6 inv = eig.eigenvalues().unaryExpr([floor](double l) { return 1.0 / std::max(l, floor); });
    const Matrix6& V = eig.eigenvectors();
    const Matrix6 info = V * inv.asDiagonal() * V.transpose();
    return 0.5 * (info + info.transpose());
}

PoseEdge edge_from_registration(std::size_t from, std::size_t to, const RigidTransform& T,
                                const Matrix6& covariance, double floor) {
    // X_from^-1 X_to maps frame `to` into frame `from`, i.e. T^-1.
    const Matrix6 A = inverse_tangent_jacobian(T);
    const Matrix6 cov_inv = A * covariance * A.transpose();
    return {from, to, T.inverse(), information_from_covariance(cov_inv, floor)};
}

double edge_mahalanobis(const PoseEdge& edge, const RigidTransform& x_from, const RigidTransform& x_to) {
    const Vector6 r = edge_residual(edge, x_from, x_to);
    return std::sqrt(std::max(0.0, r.dot(edge.information * r)));
}

double graph_chi2(const PoseGraph& graph, const std::vector<RigidTransform>& poses) {
    if (poses.size() != graph.nodes().size()) {
        throw DomainError("graph_chi2: pose count does not match node count");
    }
    double chi2 = 0.0;
    for (const PoseEdge& e : graph.edges()) {
        const Vector6 r = edge_residual(e, poses[graph.index_of(e.from)], poses[graph.index_of(e.to)]);
        chi2 += r.dot(e.information * r);
    }
    return chi2;
}

void OptimizerConfig::validate() const {
    if (max_iter < 0) {
        throw DomainError("optimizer: max_iter must be >= 0");
    }
    if (!(tol >= 0.0) || !(damping > 0.0)) {
        throw DomainError("optimizer: tol must be >= 0 and damping > 0");
    }
}

OptimizationResult optimize(const PoseGraph& graph, const OptimizerConfig& config) {
    config.validate();
    if (graph.nodes().empty()) {
        throw DomainError("optimize: empty graph");
    }
    if (!graph.connected()) {
        throw DomainError("optimize: graph is not connected");
    }
    const std::size_t n = graph.nodes().size();
    std::vector<std::pair<std::size_t, std::size_t>> ends;
    for (const PoseEdge& e : graph.edges()) {
        ends.emplace_back(graph.index_of(e.from), graph.index_of(e.to));
    }

    OptimizationResult out;
    for (const PoseNode& node : graph.nodes()) {
        out.poses.push_back(node.pose);
    }
    double chi2 = graph_chi2(graph, out.poses);
    out.chi2_trace.push_back(chi2);
    if (n == 1) {
        out.converged = true;
        return out;
    }

    const Eigen::Index dim = static_cast<Eigen::Index>(6 * (n - 1));
    double lambda = config.damping;
    for (int it = 0; it < config.max_iter; ++it) {
        out.iterations = it + 1;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
        for (std::size_t k = 0; k < graph.edges().size(); ++k) {
            const PoseEdge& e = graph.edges()[k];
            const auto [a, b] = ends[k];
            const Vector6 r = edge_residual(e, out.poses[a], out.poses[b]);
            const EdgeJacobians J = edge_jacobians(e, out.poses[a], out.poses[b]);
            const Matrix6& W = e.information;
            // node 0 is the gauge and carries no block
            const std::pair<std::size_t, const Matrix6*> blocks[2] = {{a, &J.d_from}, {b, &J.d_to}};
            for (const auto& [u, Ju] : blocks) {
                if (u == 0) {
                    continue;
                }
                const Eigen::Index iu = static_cast<Eigen::Index>(6 * (u - 1));
                g.segment<6>(iu) += Ju->transpose() * W * r;
                for (const auto& [v, Jv] : blocks) {
                    if (v == 0) {
                        continue;
                    }
                    const Eigen::Index iv = static_cast<Eigen::Index>(6 * (v - 1));
                    H.block<6, 6>(iu, iv) += Ju->transpose() * W * *Jv;
                }
            }
        }

        bool accepted = false;
        while (!accepted && lambda < 1e16) {
            Eigen::MatrixXd A = H;
            A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
                throw NumericalError("optimize: singular normal equations");
            }
            const Eigen::VectorXd step = ldlt.solve(-g);
            if (!step.allFinite()) {
                throw NumericalError("optimize: singular normal equations");
            }
            std::vector<RigidTransform> trial = out.poses;
            for (std::size_t u = 1; u < n; ++u) {
                trial[u] = trial[u] * exp6(step.segment<6>(static_cast<Eigen::Index>(6 * (u - 1))));
            }
            double trial_chi2 = std::numeric_limits<double>::infinity();
            try {
                trial_chi2 = graph_chi2(graph, trial);
            } catch (const DomainError&) {
                // residual rotation wrapped past pi; treat as a failed step
            }
            if (trial_chi2 <= chi2) {
                const double delta = chi2 - trial_chi2;
                out.poses = std::move(trial);
                chi2 = trial_chi2;
                out.chi2_trace.push_back(chi2);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (delta < config.tol || chi2 == 0.0) {
                    out.converged = true;
                    return out;
                }
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted) {
            // no descent direction left at any damping
            out.converged = true;
            return out;
        }
    }
    return out;
}

std::vector<RigidTransform> dead_reckoning(const PoseGraph& graph) {
    if (!graph.connected()) {
        throw DomainError("dead_reckoning: graph is not connected");
    }
    const std::size_t n = graph.nodes().size();
    std::vector<RigidTransform> poses(n);
    std::vector<bool> known(n, false);
    poses[0] = graph.nodes()[0].pose;
    known[0] = true;
    std::size_t remaining = n - 1;
    while (remaining > 0) {
        for (const PoseEdge& e : graph.edges()) {
            const std::size_t a = graph.index_of(e.from);
            const std::size_t b = graph.index_of(e.to);
            if (known[a] && !known[b]) {
                poses[b] = poses[a] * e.measurement;
                known[b] = true;
                --remaining;
            } else if (known[b] && !known[a]) {
                poses[a] = poses[b] * e.measurement.inverse();
                known[a] = true;
                --remaining;
            }
        }
    }
    return poses;
}

}  // namespace maskreg
