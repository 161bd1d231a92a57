#include "maskreg/sensor.hpp"

#include <cmath>

#include <Eigen/LU>

namespace maskreg {

namespace {

// Terms for a point already pulled back into frame A (pa), given R and the
// cached Q_B^-1, det Q_B of the point in frame B.
LikelihoodTerms terms_at(const Vector3& pa, const Matrix3& R, const Matrix3& qb_inv, double qb_det,
                         const Matrix3& noise) {
    LikelihoodTerms t;
    t.anchor = to_ray(pa);
    const double z = pa.z();
    const double qa_det = t.anchor.r / (z * z * z);
    if (!std::isfinite(qa_det) || qa_det < 1e-300) {
        throw NumericalError("likelihood_terms: Q_A is singular");
    }
    // M^-1 = Q_A R^-1 Q_B^-1
    const Matrix3 m_inv = ray_jacobian(pa) * R.transpose() * qb_inv;
    Matrix3 cov = m_inv * noise * m_inv.transpose() + noise;
    cov = 0.5 * (cov + cov.transpose()).eval();
    t.covariance = cov;
    Matrix3 lambda = cov.inverse();
    lambda = 0.5 * (lambda + lambda.transpose()).eval();
    t.precision = lambda;

    const double l33 = lambda(2, 2);
    t.marginal_precision(0, 0) = (lambda(0, 0) * l33 - lambda(2, 0) * lambda(2, 0)) / l33;
    t.marginal_precision(1, 1) = (lambda(1, 1) * l33 - lambda(2, 1) * lambda(2, 1)) / l33;
    t.marginal_precision(0, 1) = (l33 * lambda(1, 0) - lambda(2, 0) * lambda(2, 1)) / l33;
    t.marginal_precision(1, 0) = t.marginal_precision(0, 1);
    t.erf_direction = Vector3(lambda(2, 0), lambda(2, 1), l33) / std::sqrt(2.0 * l33);

    // L + M L M^T = M (M^-1 L M^-T + L) M^T and det R = 1, so
    // |L + M L M^T| = (det Q_B / det Q_A)^2 |Lambda^-1|.
    const double det_m = qb_det / qa_det;
    t.k2 = 1.0 / (std::abs(det_m) * std::sqrt(cov.determinant()));
    return t;
}

}  // namespace

void PointLikelihoodConfig::validate() const {
    if (!(window_radius > 0.0)) {
        throw DomainError("likelihood config: window radius must be positive");
    }
    if (!(reject_floor >= 0.0)) {
        throw DomainError("likelihood config: reject floor must be non-negative");
    }
}

PreparedPoint prepare_point(const RayPoint& b) {
    PreparedPoint p;
    p.ray = b;
    p.cartesian = from_ray(b);
    p.jacobian_inverse = ray_jacobian_inverse(b);
    const double z = p.cartesian.z();
    p.jacobian_det = b.r / (z * z * z);
    return p;
}

std::vector<PreparedPoint> prepare_cloud(std::span<const RayPoint> cloud) {
    std::vector<PreparedPoint> out;
    out.reserve(cloud.size());
    for (const RayPoint& b : cloud) {
        out.push_back(prepare_point(b));
    }
    return out;
}

LikelihoodTerms likelihood_terms(const RayPoint& b, const RigidTransform& T, const Matrix3& noise) {
    const PreparedPoint p = prepare_point(b);
    const Vector3 pa = T.rotation().transpose() * (p.cartesian - T.translation());
    if (!(pa.z() > 0.0)) {
        throw DomainError("likelihood_terms: [b]_A lies behind camera A");
    }
    return terms_at(pa, T.rotation(), p.jacobian_inverse, p.jacobian_det, noise);
}

MaskLikelihood::MaskLikelihood(const DepthImage& mask, PointLikelihoodConfig config)
    : mask_(&mask), config_(config) {
    config_.validate();
}

double MaskLikelihood::window_sum(const LikelihoodTerms& terms) const {
    const CameraModel& cam = mask_->camera();
    const double radius = config_.window_radius;
    const double r2 = radius * radius;
    const double f = cam.focal;
    const double uc = cam.w_to_col(terms.anchor.w);
    const double vc = cam.h_to_row(terms.anchor.h);
    // Bounding box of the Mahalanobis ellipse; D^-1 is the (w, h) block of Lambda^-1.
    const double half_u = radius * std::sqrt(terms.covariance(0, 0)) * f;
    const double half_v = radius * std::sqrt(terms.covariance(1, 1)) * f;
    const int c0 = static_cast<int>(std::ceil(uc - half_u));
    const int c1 = static_cast<int>(std::floor(uc + half_u));
    const int r0 = static_cast<int>(std::ceil(vc - half_v));
    const int r1 = static_cast<int>(std::floor(vc + half_v));

    const double d11 = terms.marginal_precision(0, 0);
    const double d12 = terms.marginal_precision(0, 1);
    const double d22 = terms.marginal_precision(1, 1);
    const Vector3& v = terms.erf_direction;
    const double saturated = config_.unknown == UnknownPolicy::FreeSpace ? 2.0 : 0.0;

    double sum = 0.0;
    for (int row = r0; row <= r1; ++row) {
        const double dh = terms.anchor.h - cam.row_to_h(row);
        for (int col = c0; col <= c1; ++col) {
            const double dw = terms.anchor.w - cam.col_to_w(col);
            const double m2 = d11 * dw * dw + 2.0 * d12 * dw * dh + d22 * dh * dh;
            if (m2 > r2) {
                continue;
            }
            const double gauss = std::exp(-0.5 * m2);
            double factor = saturated;
            if (mask_->in_bounds(col, row)) {
                const PixelObservation& px = mask_->at(col, row);
                if (px.measured()) {
                    const double dr = terms.anchor.r - px.depth;
                    // 1 + erf(x) == erfc(-x), accurate deep in the negative tail.
                    factor = std::erfc(-(v.x() * dw + v.y() * dh + v.z() * dr));
                }
            }
            sum += gauss * factor;
        }
    }
    return sum;
}

std::optional<double> MaskLikelihood::point(const PreparedPoint& b, const RigidTransform& T) const {
    const Matrix3& R = T.rotation();
    const Vector3 pa = R.transpose() * (b.cartesian - T.translation());
    if (!(pa.z() > 0.0)) {
        return std::nullopt;
    }
    const LikelihoodTerms terms = terms_at(pa, R, b.jacobian_inverse, b.jacobian_det, mask_->camera().noise);
    const double sum = window_sum(terms);
    if (!(sum > config_.reject_floor)) {
        return std::nullopt;
    }
    return std::log(terms.k2) + std::log(sum);
}

std::optional<double> MaskLikelihood::cloud(std::span<const PreparedPoint> points, const RigidTransform& T) const {
    if (points.empty()) {
        throw DomainError("cloud likelihood: point cloud is empty");
    }
    double total = 0.0;
    for (const PreparedPoint& b : points) {
        const auto lp = point(b, T);
        if (!lp) {
            return std::nullopt;
        }
        total += *lp;
    }
    return total;
}

std::optional<double> point_log_likelihood(const RayPoint& b, const DepthImage& mask, const RigidTransform& T,
                                           const PointLikelihoodConfig& config) {
    return MaskLikelihood(mask, config).point(prepare_point(b), T);
}

std::optional<double> cloud_log_likelihood(std::span<const RayPoint> cloud, const DepthImage& mask,
                                           const RigidTransform& T, const PointLikelihoodConfig& config) {
    const auto prepared = prepare_cloud(cloud);
    return MaskLikelihood(mask, config).cloud(prepared, T);
}

}  // namespace maskreg
