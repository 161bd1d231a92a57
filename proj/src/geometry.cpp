#include "maskreg/geometry.hpp"

#include <cmath>

namespace maskreg {

RayPoint to_ray(const CartesianPoint& p) {
    if (!(p.z() > 0.0)) {
        throw DomainError("to_ray: point must lie in front of the camera (z > 0)");
    }
    return {p.x() / p.z(), p.y() / p.z(), p.norm()};
}

CartesianPoint from_ray(const RayPoint& q) {
    if (!(q.r > 0.0)) {
        throw DomainError("from_ray: range must be positive");
    }
    const double z = q.r / std::sqrt(1.0 + q.w * q.w + q.h * q.h);
    return {q.w * z, q.h * z, z};
}

Matrix3 ray_jacobian(const CartesianPoint& p) {
    if (!(p.z() > 0.0)) {
        throw DomainError("ray_jacobian: point must lie in front of the camera (z > 0)");
    }
    const double x = p.x(), y = p.y(), z = p.z();
    const double r = p.norm();
    const double iz = 1.0 / z;
    Matrix3 Q;
    Q << iz, 0.0, -x * iz * iz,
         0.0, iz, -y * iz * iz,
         x / r, y / r, z / r;
    return Q;
}

Matrix3 ray_jacobian_inverse(const RayPoint& q) {
    if (!(q.r > 0.0)) {
        throw DomainError("ray_jacobian_inverse: range must be positive");
    }
    const double w = q.w, h = q.h, r = q.r;
    const double s = std::sqrt(1.0 + w * w + h * h);
    const double z = r / s;
    const double s3 = s * s * s;
    // z = r / s, x = w z, y = h z
    const double dz_dw = -r * w / s3;
    const double dz_dh = -r * h / s3;
    const double dz_dr = 1.0 / s;
    Matrix3 J;
    J << z + w * dz_dw, w * dz_dh, w * dz_dr,
         h * dz_dw, z + h * dz_dh, h * dz_dr,
         dz_dw, dz_dh, dz_dr;
    return J;
}

Matrix3 skew(const Vector3& v) {
    Matrix3 S;
    S << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return S;
}

Matrix3 so3_exp(const Vector3& omega) {
    const double theta = omega.norm();
    const Matrix3 W = skew(omega);
    if (theta < 1e-8) {
        return Matrix3::Identity() + W + 0.5 * W * W;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Matrix3::Identity() + a * W + b * W * W;
}

double rotation_angle(const Matrix3& R) {
    const Eigen::Quaterniond q(R);
    return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

Vector3 so3_log(const Matrix3& R) {
    const Eigen::Quaterniond q(R);
    const double vn = q.vec().norm();
    // atan2 keeps both ends of [0, pi) accurate.
    double theta = 2.0 * std::atan2(vn, std::abs(q.w()));
    if (theta >= M_PI - 1e-9) {
        throw DomainError("so3_log: rotation angle must be < pi");
    }
    if (vn < 1e-15) {
        return Vector3::Zero();
    }
    const double sign = q.w() < 0.0 ? -1.0 : 1.0;
    return sign * (theta / vn) * q.vec();
}

Matrix3 so3_right_jacobian_inverse(const Vector3& phi) {
    const double theta = phi.norm();
    const Matrix3 W = skew(phi);
    double c;
    if (theta < 1e-5) {
        c = 1.0 / 12.0 + theta * theta / 720.0;
    } else {
        c = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    }
    return Matrix3::Identity() + 0.5 * W + c * W * W;
}

Eigen::Matrix4d RigidTransform::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }

RigidTransform invert(const RigidTransform& T) { return T.inverse(); }

RigidTransform exp6(const Vector6& v) {
    return {so3_exp(v.head<3>()), v.tail<3>()};
}

Vector6 log6(const RigidTransform& T) {
    Vector6 v;
    v.head<3>() = so3_log(T.rotation());
    v.tail<3>() = T.translation();
    return v;
}

Matrix6 inverse_tangent_jacobian(const RigidTransform& mean) {
    const Matrix3& R = mean.rotation();
    Matrix6 A = Matrix6::Zero();
    A.topLeftCorner<3, 3>() = -R;
    A.bottomLeftCorner<3, 3>() = -skew(mean.translation()) * R;
    A.bottomRightCorner<3, 3>() = -R;
    return A;
}

CrossLinearization linearized_cross_transform(const RayPoint& b, const RigidTransform& T) {
    const CartesianPoint pb = from_ray(b);
    const CartesianPoint pa = T.inverse().apply(pb);
    if (!(pa.z() > 0.0)) {
        throw DomainError("linearized_cross_transform: [b]_A lies behind camera A");
    }
    const RayPoint anchor = to_ray(pa);
    // det Q = r / z^3, so Q_A degenerates only as z -> 0 or r -> inf.
    const double det_qa = anchor.r / (pa.z() * pa.z() * pa.z());
    if (!std::isfinite(det_qa) || det_qa < 1e-300) {
        throw NumericalError("linearized_cross_transform: Q_A is singular");
    }
    const Matrix3 M = ray_jacobian(pb) * T.rotation() * ray_jacobian_inverse(anchor);
    return {anchor, M};
}

RayPoint cross_transform(const RayPoint& s, const RigidTransform& T) {
    return to_ray(T.apply(from_ray(s)));
}

}  // namespace maskreg
