#pragma once

#include <span>
#include <variant>

#include "maskreg/geometry.hpp"
#include "maskreg/random.hpp"

namespace maskreg {

/// Centroid alignment anchor: T moves the centroid of P_A to within
/// `max_shift` of the centroid of P_B, rotating by at most `max_angle`.
struct Bounded6DofPrior {
    double max_shift = 0.04;             // meters
    double max_angle = 50.0 * M_PI / 180.0;  // radians, geodesic
};

/// Motion on a table: rotation about the table normal by at most `max_yaw`,
/// translation parallel to the table within `max_shift` of the in-plane
/// centroid alignment.
struct PlanarPrior {
    Vector3 plane_point = Vector3::Zero();
    Vector3 normal = Vector3::UnitZ();
    double max_shift = 0.04;
    double max_yaw = 50.0 * M_PI / 180.0;
};

/// exp6(mean + chol(covariance) z), z ~ N(0, I).
struct GaussianPrior {
    Vector6 mean = Vector6::Zero();
    Matrix6 covariance = Matrix6::Identity() * 1e-6;
};

struct PriorSpec {
    std::variant<Bounded6DofPrior, PlanarPrior, GaussianPrior> params;

    /// Throws DomainError on non-positive bounds, a non-unit normal or a
    /// covariance that is not SPD.
    void validate() const;
};

/// Centroid of a cloud given in ray coordinates, in Cartesian coordinates.
Vector3 cloud_centroid(std::span<const RayPoint> cloud);

/// A prior with its centroid anchors fixed by the two clouds.
class BoundPrior {
public:
    BoundPrior(PriorSpec spec, const Vector3& centroid_a, const Vector3& centroid_b);
    /// Throws DomainError on empty clouds for the centroid-anchored variants.
    BoundPrior(PriorSpec spec, std::span<const RayPoint> cloud_a, std::span<const RayPoint> cloud_b);

    const PriorSpec& spec() const { return spec_; }
    const Vector3& centroid_a() const { return centroid_a_; }
    const Vector3& centroid_b() const { return centroid_b_; }

    RigidTransform sample(Rng& rng) const;

    /// True iff T lies in the (closed) support, within `tol`.
    bool contains(const RigidTransform& T, double tol = 1e-9) const;

private:
    PriorSpec spec_;
    Vector3 centroid_a_;
    Vector3 centroid_b_;
    Matrix6 chol_;  // Gaussian only
};

RigidTransform sample(const PriorSpec& prior, std::span<const RayPoint> cloud_a, std::span<const RayPoint> cloud_b,
                      Rng& rng);

bool support_check(const BoundPrior& prior, const RigidTransform& T);

}  // namespace maskreg
