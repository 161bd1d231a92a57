#pragma once

#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace maskreg {

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Thrown when an operation is called outside its mathematical domain
/// (a point behind the camera, a rotation angle at or beyond pi, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when a numerically degenerate configuration is hit
/// (singular Jacobian, rank-deficient normal equations, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cartesian point in a camera frame; z looks along the optical axis.
using CartesianPoint = Vector3;

/// A point in ray coordinates: image-plane direction (w, h) at unit focal
/// length and the Euclidean range r.
struct RayPoint {
    double w = 0.0;
    double h = 0.0;
    double r = 0.0;

    Vector3 vec() const { return {w, h, r}; }
    static RayPoint from_vec(const Vector3& v) { return {v.x(), v.y(), v.z()}; }
};

RayPoint to_ray(const CartesianPoint& p);
CartesianPoint from_ray(const RayPoint& q);

/// Q = d(w,h,r)/d(x,y,z) at p.
Matrix3 ray_jacobian(const CartesianPoint& p);

/// d(x,y,z)/d(w,h,r) at q; the inverse of ray_jacobian(from_ray(q)).
Matrix3 ray_jacobian_inverse(const RayPoint& q);

// SO(3) helpers.
Matrix3 skew(const Vector3& v);
Matrix3 so3_exp(const Vector3& omega);
/// Rotation vector of R. Throws DomainError when the angle is at pi
/// (within numerical tolerance) since the axis sign is then ambiguous.
Vector3 so3_log(const Matrix3& R);
/// Inverse of the right Jacobian of SO(3) at phi.
Matrix3 so3_right_jacobian_inverse(const Vector3& phi);
/// Geodesic rotation angle in radians, in [0, pi].
double rotation_angle(const Matrix3& R);

/// Rigid body transform p -> R p + t.
///
/// The 6-vector tangent parametrization is (rotation vector, translation),
/// rotation first; exp6/log6 map between the two without coupling the
/// translation to the rotation.
class RigidTransform {
public:
    RigidTransform() : rotation_(Matrix3::Identity()), translation_(Vector3::Zero()) {}
    RigidTransform(const Matrix3& rotation, const Vector3& translation)
        : rotation_(rotation), translation_(translation) {}

    static RigidTransform identity() { return {}; }

    const Matrix3& rotation() const { return rotation_; }
    const Vector3& translation() const { return translation_; }

    Vector3 apply(const Vector3& p) const { return rotation_ * p + translation_; }
    Vector3 operator*(const Vector3& p) const { return apply(p); }

    /// (this * other)(p) = this(other(p)).
    RigidTransform operator*(const RigidTransform& other) const {
        return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
    }

    RigidTransform inverse() const {
        Matrix3 Rt = rotation_.transpose();
        return {Rt, -(Rt * translation_)};
    }

    Eigen::Matrix4d matrix() const;

private:
    Matrix3 rotation_;
    Vector3 translation_;
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& T);
RigidTransform exp6(const Vector6& v);
/// Throws DomainError when the rotation angle is >= pi.
Vector6 log6(const RigidTransform& T);

/// First-order map of a tangent-space covariance through inversion:
/// if T = mean * exp6(d) with Cov(d) = cov, then T^-1 = mean^-1 * exp6(d')
/// with Cov(d') = A cov A^T, A returned here.
Matrix6 inverse_tangent_jacobian(const RigidTransform& mean);

/// Linearization of the map taking ray coordinates in image A to ray
/// coordinates in image B under T:
///   [s]_B ~= b + M (s - anchor),  M = Q_B R Q_A^-1,
/// where anchor = [b]_A is b pulled back into frame A.
struct CrossLinearization {
    RayPoint anchor;
    Matrix3 M;
};

/// T maps points observed in frame A to frame B (p_B = T p_A).
/// Throws DomainError if [b]_A lies behind camera A, NumericalError if Q_A is
/// singular.
CrossLinearization linearized_cross_transform(const RayPoint& b, const RigidTransform& T);

/// Exact ray-coordinate map from frame A to frame B under T.
RayPoint cross_transform(const RayPoint& s, const RigidTransform& T);

}  // namespace maskreg
