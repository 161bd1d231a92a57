#include "maskreg/priors.hpp"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>

namespace maskreg {

namespace {

Vector3 unit_sphere(Rng& rng) {
    std::normal_distribution<double> n01;
    Vector3 v;
    do {
        v = Vector3(n01(rng), n01(rng), n01(rng));
    } while (v.squaredNorm() < 1e-24);
    return v.normalized();
}

Vector3 in_plane_axis(const Vector3& n) {
    const Vector3 seed = std::abs(n.x()) < 0.9 ? Vector3::UnitX() : Vector3::UnitY();
    return (seed - seed.dot(n) * n).normalized();
}

Matrix3 plane_projector(const Vector3& n) { return Matrix3::Identity() - n * n.transpose(); }

}  // namespace

void PriorSpec::validate() const {
    std::visit(
        [](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Bounded6DofPrior>) {
                if (!(p.max_shift >= 0.0) || !(p.max_angle >= 0.0) || p.max_angle >= M_PI) {
                    throw DomainError("bounded prior: bounds must be in [0, inf) x [0, pi)");
                }
            } else if constexpr (std::is_same_v<P, PlanarPrior>) {
                if (!(p.max_shift >= 0.0) || !(p.max_yaw >= 0.0) || p.max_yaw >= M_PI) {
                    throw DomainError("planar prior: bounds must be in [0, inf) x [0, pi)");
                }
                if (std::abs(p.normal.norm() - 1.0) > 1e-9) {
                    throw DomainError("planar prior: plane normal must be unit length");
                }
            } else {
                if (!p.mean.allFinite() || !p.covariance.allFinite()) {
                    throw DomainError("gaussian prior: parameters must be finite");
                }
                if ((p.covariance - p.covariance.transpose()).cwiseAbs().maxCoeff() >
                    1e-12 * p.covariance.cwiseAbs().maxCoeff()) {
                    throw DomainError("gaussian prior: covariance must be symmetric");
                }
                Eigen::LLT<Matrix6> llt(p.covariance);
                if (llt.info() != Eigen::Success) {
                    throw DomainError("gaussian prior: covariance must be positive definite");
                }
            }
        },
        params);
}

Vector3 cloud_centroid(std::span<const RayPoint> cloud) {
    if (cloud.empty()) {
        throw DomainError("cloud_centroid: empty cloud");
    }
    Vector3 sum = Vector3::Zero();
    for (const RayPoint& q : cloud) {
        sum += from_ray(q);
    }
    return sum / static_cast<double>(cloud.size());
}

BoundPrior::BoundPrior(PriorSpec spec, const Vector3& centroid_a, const Vector3& centroid_b)
    : spec_(std::move(spec)), centroid_a_(centroid_a), centroid_b_(centroid_b), chol_(Matrix6::Zero()) {
    spec_.validate();
    if (const auto* g = std::get_if<GaussianPrior>(&spec_.params)) {
        chol_ = Eigen::LLT<Matrix6>(g->covariance).matrixL();
    }
}

BoundPrior::BoundPrior(PriorSpec spec, std::span<const RayPoint> cloud_a, std::span<const RayPoint> cloud_b)
    : BoundPrior(spec,
                 std::holds_alternative<GaussianPrior>(spec.params) ? Vector3::Zero().eval() : cloud_centroid(cloud_a),
                 std::holds_alternative<GaussianPrior>(spec.params) ? Vector3::Zero().eval() : cloud_centroid(cloud_b)) {}

RigidTransform BoundPrior::sample(Rng& rng) const {
    return std::visit(
        [&](const auto& p) -> RigidTransform {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Bounded6DofPrior>) {
                const Vector3 axis = unit_sphere(rng);
                const double angle = p.max_angle * rng.uniform();
                const Matrix3 R = so3_exp(axis * angle);
                const Vector3 dir = unit_sphere(rng);
                const double radius = p.max_shift * std::cbrt(rng.uniform());
                return {R, centroid_b_ - R * centroid_a_ + radius * dir};
            } else if constexpr (std::is_same_v<P, PlanarPrior>) {
                const Vector3& n = p.normal;
                const double yaw = p.max_yaw * (2.0 * rng.uniform() - 1.0);
                const Matrix3 R = so3_exp(n * yaw);
                const Vector3 e1 = in_plane_axis(n);
                const Vector3 e2 = n.cross(e1);
                const double radius = p.max_shift * std::sqrt(rng.uniform());
                const double phi = 2.0 * M_PI * rng.uniform();
                const Vector3 base = plane_projector(n) * (centroid_b_ - R * centroid_a_);
                return {R, base + radius * (std::cos(phi) * e1 + std::sin(phi) * e2)};
            } else {
                std::normal_distribution<double> n01;
                Vector6 z;
                for (int i = 0; i < 6; ++i) {
                    z[i] = n01(rng);
                }
                return exp6(p.mean + chol_ * z);
            }
        },
        spec_.params);
}

bool BoundPrior::contains(const RigidTransform& T, double tol) const {
    return std::visit(
        [&](const auto& p) -> bool {
            using P = std::decay_t<decltype(p)>;
            const Matrix3& R = T.rotation();
            if constexpr (std::is_same_v<P, Bounded6DofPrior>) {
                const double shift = (R * centroid_a_ + T.translation() - centroid_b_).norm();
                return rotation_angle(R) <= p.max_angle + tol && shift <= p.max_shift + tol;
            } else if constexpr (std::is_same_v<P, PlanarPrior>) {
                const Vector3& n = p.normal;
                if ((R * n - n).norm() > tol || std::abs(n.dot(T.translation())) > tol) {
                    return false;
                }
                const Vector3 base = plane_projector(n) * (centroid_b_ - R * centroid_a_);
                return rotation_angle(R) <= p.max_yaw + tol && (T.translation() - base).norm() <= p.max_shift + tol;
            } else {
                return true;
            }
        },
        spec_.params);
}

RigidTransform sample(const PriorSpec& prior, std::span<const RayPoint> cloud_a, std::span<const RayPoint> cloud_b,
                      Rng& rng) {
    return BoundPrior(prior, cloud_a, cloud_b).sample(rng);
}

bool support_check(const BoundPrior& prior, const RigidTransform& T) { return prior.contains(T); }

}  // namespace maskreg
