#pragma once

#include <span>
#include <vector>

#include "maskreg/geometry.hpp"

namespace maskreg {

struct IcpConfig {
    int max_iter = 50;
    double tol = 1e-9;             // on the RMS change, meters
    double max_corr_dist = 0.05;   // meters

    void validate() const;
};

struct IcpResult {
    RigidTransform transform;  // maps P_A into the frame of P_B
    double rms = 0.0;          // sqrt(mean(min(d^2, max_corr_dist^2))) over P_A
    int iterations = 0;
    bool converged = false;
    std::vector<double> rms_trace;
};

/// Least-squares rigid fit dst ~= T src over paired points.
/// Throws DomainError for mismatched sizes or fewer than 3 non-collinear
/// pairs.
RigidTransform kabsch(std::span<const Vector3> src, std::span<const Vector3> dst);

/// Point-to-point ICP from `init`. Each round pairs every point of P_A with
/// its nearest neighbour in P_B, drops pairs farther than max_corr_dist and
/// refits with kabsch on the remaining pairs. Stops when the RMS drops by
/// less than tol; the RMS trace is non-increasing.
///
/// Throws DomainError on clouds with fewer than 3 points or when the gated
/// correspondence set degenerates.
IcpResult icp(std::span<const Vector3> cloud_a, std::span<const Vector3> cloud_b, const RigidTransform& init,
              const IcpConfig& config = {});

}  // namespace maskreg
