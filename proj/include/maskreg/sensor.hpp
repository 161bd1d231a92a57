#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "maskreg/depth_image.hpp"
#include "maskreg/geometry.hpp"

namespace maskreg {

/// Gaussian terms of p(b | M_A, T) for one point b of image B under T.
///
/// precision is Lambda with
///   Lambda^-1 = M^-1 L M^-T + L,  M = Q_B R Q_A^-1,
/// marginal_precision is D (precision of the (w, h) marginal), erf_direction
/// is v = (L31, L32, L33) / sqrt(2 L33) and k2 = |L + M L M^T|^(-1/2).
struct LikelihoodTerms {
    RayPoint anchor;            // [b]_A
    Matrix3 precision;          // Lambda
    Matrix3 covariance;         // Lambda^-1
    Eigen::Matrix2d marginal_precision;  // D
    Vector3 erf_direction;      // v
    double k2 = 0.0;
};

enum class UnknownPolicy {
    /// UNKNOWN and out-of-view pixels allow any depth: saturated factor 2.
    FreeSpace,
    /// UNKNOWN and out-of-view pixels are dropped from the sum.
    Ignore,
};

struct PointLikelihoodConfig {
    /// Pixels whose (w, h) Mahalanobis distance to [b]_A under D exceeds this
    /// radius are left out of the sum.
    double window_radius = 6.0;
    /// A point is rejected when its likelihood is at or below
    /// reject_floor * K2, i.e. when the window sum is <= reject_floor.
    double reject_floor = 1e-6;
    UnknownPolicy unknown = UnknownPolicy::FreeSpace;

    /// Throws DomainError on a non-positive radius or negative floor.
    void validate() const;
};

/// Throws DomainError if [b]_A is behind camera A, NumericalError if Q_A is
/// singular.
LikelihoodTerms likelihood_terms(const RayPoint& b, const RigidTransform& T, const Matrix3& noise);

/// A point of the registered cloud with its T-independent quantities cached.
struct PreparedPoint {
    RayPoint ray;
    Vector3 cartesian;
    Matrix3 jacobian_inverse;  // Q_B^-1
    double jacobian_det = 0.0; // det Q_B = r / z^3
};

PreparedPoint prepare_point(const RayPoint& b);
std::vector<PreparedPoint> prepare_cloud(std::span<const RayPoint> cloud);

/// Evaluates log p(b | M_A, T) against one mask image. Immutable and safe to
/// share across threads.
class MaskLikelihood {
public:
    /// Keeps a reference to `mask`; it must outlive this object.
    MaskLikelihood(const DepthImage& mask, PointLikelihoodConfig config = {});

    const DepthImage& mask() const { return *mask_; }
    const PointLikelihoodConfig& config() const { return config_; }

    /// log K2 + log sum_i exp(-1/2 d_wh^T D d_wh) (1 + erf(v^T d)), or nullopt
    /// (REJECT) when [b]_A is behind the camera or the sum is <= reject_floor.
    std::optional<double> point(const PreparedPoint& b, const RigidTransform& T) const;

    /// Sum of point(); REJECT as soon as any point rejects.
    /// Throws DomainError on an empty cloud.
    std::optional<double> cloud(std::span<const PreparedPoint> points, const RigidTransform& T) const;

    /// Window sum (without K2) for already computed terms.
    double window_sum(const LikelihoodTerms& terms) const;

private:
    const DepthImage* mask_;
    PointLikelihoodConfig config_;
};

std::optional<double> point_log_likelihood(const RayPoint& b, const DepthImage& mask, const RigidTransform& T,
                                           const PointLikelihoodConfig& config = {});

std::optional<double> cloud_log_likelihood(std::span<const RayPoint> cloud, const DepthImage& mask,
                                           const RigidTransform& T, const PointLikelihoodConfig& config = {});

}  // namespace maskreg
