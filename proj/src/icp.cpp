#include "maskreg/icp.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace maskreg {

namespace {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BPoint, std::size_t>;
using Tree = bgi::rtree<Entry, bgi::quadratic<16>>;

BPoint to_bpoint(const Vector3& p) { return {p.x(), p.y(), p.z()}; }

bool degenerate(std::span<const Vector3> pts) {
    if (pts.size() < 3) {
        return true;
    }
    Vector3 mean = Vector3::Zero();
    for (const Vector3& p : pts) {
        mean += p;
    }
    mean /= static_cast<double>(pts.size());
    Matrix3 scatter = Matrix3::Zero();
    for (const Vector3& p : pts) {
        scatter += (p - mean) * (p - mean).transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix3> eig(scatter);
    const Vector3 ev = eig.eigenvalues();
    // collinear: only one direction carries spread
    return !(ev[1] > 1e-12 * std::max(ev[2], 1e-300));
}

}  // namespace

void IcpConfig::validate() const {
    if (max_iter < 1) {
        throw DomainError("icp: max_iter must be >= 1");
    }
    if (!(tol >= 0.0) || !(max_corr_dist > 0.0)) {
        throw DomainError("icp: tol must be >= 0 and max_corr_dist > 0");
    }
}

RigidTransform kabsch(std::span<const Vector3> src, std::span<const Vector3> dst) {
    if (src.size() != dst.size()) {
        throw DomainError("kabsch: point sets differ in size");
    }
    if (degenerate(src) || degenerate(dst)) {
        throw DomainError("kabsch: need at least 3 non-collinear pairs");
    }
    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::Matrix3Xd s(3, n);
    Eigen::Matrix3Xd d(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s.col(i) = src[static_cast<std::size_t>(i)];
        d.col(i) = dst[static_cast<std::size_t>(i)];
    }
    const Eigen::Matrix4d m = Eigen::umeyama(s, d, false);
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

IcpResult icp(std::span<const Vector3> cloud_a, std::span<const Vector3> cloud_b, const RigidTransform& init,
              const IcpConfig& config) {
    config.validate();
    if (cloud_a.size() < 3 || cloud_b.size() < 3) {
        throw DomainError("icp: each cloud needs at least 3 points");
    }
    std::vector<Entry> entries;
    entries.reserve(cloud_b.size());
    for (std::size_t i = 0; i < cloud_b.size(); ++i) {
        entries.emplace_back(to_bpoint(cloud_b[i]), i);
    }
    const Tree tree(entries.begin(), entries.end());

    const double gate2 = config.max_corr_dist * config.max_corr_dist;
    std::vector<Vector3> src;
    std::vector<Vector3> dst;
    std::vector<Entry> hit;
    // Pairs each point of P_A under T and returns the truncated RMS
    // sqrt(mean(min(d^2, gate^2))), which cannot grow from one round to the next.
    const auto pair_up = [&](const RigidTransform& T) {
        src.clear();
        dst.clear();
        double sum = 0.0;
        for (const Vector3& p : cloud_a) {
            const Vector3 q = T * p;
            hit.clear();
            tree.query(bgi::nearest(to_bpoint(q), 1), std::back_inserter(hit));
            const Vector3& nn = cloud_b[hit.front().second];
            const double d2 = (nn - q).squaredNorm();
            if (d2 <= gate2) {
                src.push_back(p);
                dst.push_back(nn);
            }
            sum += std::min(d2, gate2);
        }
        return std::sqrt(sum / static_cast<double>(cloud_a.size()));
    };

    IcpResult res;
    res.transform = init;
    res.rms = pair_up(init);
    res.rms_trace.push_back(res.rms);
    for (int it = 0; it < config.max_iter; ++it) {
        res.iterations = it + 1;
        if (degenerate(src) || degenerate(dst)) {
            throw DomainError("icp: degenerate correspondence set");
        }
        const RigidTransform fit = kabsch(src, dst);
        const double rms = pair_up(fit);
        if (rms > res.rms) {
            // only round-off can do this; keep the previous estimate
            res.converged = true;
            break;
        }
        const double change = res.rms - rms;
        res.transform = fit;
        res.rms = rms;
        res.rms_trace.push_back(rms);
        if (change < config.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace maskreg
