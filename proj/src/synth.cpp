#include "maskreg/synth.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "maskreg/random.hpp"

namespace maskreg {

namespace {

constexpr double kHitEpsilon = 1e-12;

std::optional<double> intersect_box(const BoxShape& box, const Vector3& o, const Vector3& d) {
    const Vector3 half = 0.5 * box.size;
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-300) {
            if (o[i] < -half[i] || o[i] > half[i]) {
                return std::nullopt;
            }
            continue;
        }
        double t1 = (-half[i] - o[i]) / d[i];
        double t2 = (half[i] - o[i]) / d[i];
        if (t1 > t2) {
            std::swap(t1, t2);
        }
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
    }
    if (t_near > t_far || t_far <= kHitEpsilon) {
        return std::nullopt;
    }
    return t_near > kHitEpsilon ? t_near : t_far;
}

std::optional<double> intersect_cylinder(const CylinderShape& cyl, const Vector3& o, const Vector3& d) {
    const double half = 0.5 * cyl.length;
    const double r2 = cyl.radius * cyl.radius;
    double best = std::numeric_limits<double>::infinity();

    // lateral surface
    const double a = d.x() * d.x() + d.y() * d.y();
    if (a > 1e-300) {
        const double b = o.x() * d.x() + o.y() * d.y();
        const double c = o.x() * o.x() + o.y() * o.y() - r2;
        const double disc = b * b - a * c;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            for (const double t : {(-b - sq) / a, (-b + sq) / a}) {
                if (t > kHitEpsilon && std::abs(o.z() + t * d.z()) <= half) {
                    best = std::min(best, t);
                }
            }
        }
    }
    // caps
    if (std::abs(d.z()) > 1e-300) {
        for (const double zc : {-half, half}) {
            const double t = (zc - o.z()) / d.z();
            if (t > kHitEpsilon) {
                const double x = o.x() + t * d.x();
                const double y = o.y() + t * d.y();
                if (x * x + y * y <= r2) {
                    best = std::min(best, t);
                }
            }
        }
    }
    if (!std::isfinite(best)) {
        return std::nullopt;
    }
    return best;
}

std::optional<double> intersect_sphere(const SphereShape& s, const Vector3& o, const Vector3& d) {
    const double a = d.squaredNorm();
    const double b = o.dot(d);
    const double c = o.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - a * c;
    if (disc < 0.0) {
        return std::nullopt;
    }
    const double sq = std::sqrt(disc);
    for (const double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t > kHitEpsilon) {
            return t;
        }
    }
    return std::nullopt;
}

Vector3 any_perpendicular(const Vector3& n) {
    const Vector3 seed = std::abs(n.x()) < 0.9 ? Vector3::UnitX() : Vector3::UnitY();
    return (seed - seed.dot(n) * n).normalized();
}

}  // namespace

void Primitive::validate() const {
    std::visit(
        [](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, BoxShape>) {
                if (!(s.size.minCoeff() > 0.0)) {
                    throw DomainError("box: extents must be positive");
                }
            } else if constexpr (std::is_same_v<S, CylinderShape>) {
                if (!(s.radius > 0.0) || !(s.length > 0.0)) {
                    throw DomainError("cylinder: radius and length must be positive");
                }
            } else {
                if (!(s.radius > 0.0)) {
                    throw DomainError("sphere: radius must be positive");
                }
            }
        },
        shape);
}

void SceneSpec::validate() const {
    for (const Primitive& p : object) {
        p.validate();
    }
    if (table) {
        if (std::abs(table->normal.norm() - 1.0) > 1e-9) {
            throw DomainError("scene: table normal must be unit length");
        }
        if (table->extent && !(*table->extent > 0.0)) {
            throw DomainError("scene: table extent must be positive");
        }
    }
    if (!(max_range > 0.0)) {
        throw DomainError("scene: max range must be positive");
    }
}

std::optional<double> intersect(const Primitive& prim, const Vector3& origin, const Vector3& dir) {
    return std::visit(
        [&](const auto& s) -> std::optional<double> {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, BoxShape>) {
                return intersect_box(s, origin, dir);
            } else if constexpr (std::is_same_v<S, CylinderShape>) {
                return intersect_cylinder(s, origin, dir);
            } else {
                return intersect_sphere(s, origin, dir);
            }
        },
        prim.shape);
}

DepthImage render(const SceneSpec& scene, const CameraModel& camera, std::uint64_t noise_seed, double sigma,
                  RenderStats* stats) {
    scene.validate();
    camera.validate();
    if (!(sigma >= 0.0)) {
        throw DomainError("render: sigma must be non-negative");
    }

    // camera frame -> primitive frame, per primitive
    std::vector<RigidTransform> to_prim;
    to_prim.reserve(scene.object.size());
    for (const Primitive& p : scene.object) {
        to_prim.push_back((scene.object_pose * p.pose).inverse());
    }

    RenderStats local;
    std::vector<PixelObservation> grid(static_cast<std::size_t>(camera.width) * camera.height);
    for (int row = 0; row < camera.height; ++row) {
        for (int col = 0; col < camera.width; ++col) {
            const Vector3 dir = Vector3(camera.col_to_w(col), camera.row_to_h(row), 1.0).normalized();
            double t_obj = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < scene.object.size(); ++i) {
                const Vector3 o = to_prim[i].translation();
                const Vector3 d = to_prim[i].rotation() * dir;
                if (const auto t = intersect(scene.object[i], o, d)) {
                    t_obj = std::min(t_obj, *t);
                }
            }

            PixelObservation px;
            double range = 0.0;
            if (t_obj <= scene.max_range) {
                px.state = PixelState::Object;
                range = t_obj;
            } else if (scene.table) {
                const Plane& pl = *scene.table;
                const double denom = pl.normal.dot(dir);
                if (std::abs(denom) > 1e-300) {
                    const double t = pl.normal.dot(pl.point) / denom;
                    const bool on_table = !pl.extent || (t * dir - pl.point).norm() <= *pl.extent;
                    if (t > kHitEpsilon && t <= scene.max_range && on_table) {
                        px.state = PixelState::Background;
                        range = t;
                    }
                }
            }

            const std::size_t idx = static_cast<std::size_t>(row) * camera.width + col;
            if (px.measured()) {
                if (sigma > 0.0) {
                    Rng rng = Rng::substream(noise_seed, idx);
                    std::normal_distribution<double> noise(0.0, sigma);
                    range += noise(rng);
                }
                range = std::max(range, camera.r_min);
                px.depth = static_cast<double>(static_cast<float>(range));
                if (px.depth < camera.r_min) {
                    px.depth = static_cast<double>(std::nextafter(static_cast<float>(camera.r_min), 1e30f));
                }
            }
            switch (px.state) {
                case PixelState::Object: ++local.object_pixels; break;
                case PixelState::Background: ++local.background_pixels; break;
                case PixelState::Unknown: ++local.unknown_pixels; break;
            }
            grid[idx] = px;
        }
    }
    if (stats) {
        *stats = local;
    }
    return DepthImage(camera, std::move(grid));
}

std::vector<SequenceFrame> make_sequence(const SceneSpec& scene, const std::vector<RigidTransform>& motions,
                                         const CameraModel& camera, double sigma, std::uint64_t seed) {
    std::vector<SequenceFrame> frames;
    frames.reserve(motions.size() + 1);
    SceneSpec current = scene;
    for (std::size_t k = 0; k <= motions.size(); ++k) {
        if (k > 0) {
            current.object_pose = motions[k - 1] * current.object_pose;
        }
        const std::uint64_t frame_seed = Rng::substream(seed, k)();
        frames.push_back({render(current, camera, frame_seed, sigma), current.object_pose});
    }
    return frames;
}

std::vector<RigidTransform> relative_ground_truth(const std::vector<SequenceFrame>& frames) {
    std::vector<RigidTransform> out;
    for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
        out.push_back(frames[k + 1].pose * frames[k].pose.inverse());
    }
    return out;
}

RigidTransform rotation_about(const Vector3& axis, double angle, const Vector3& pivot) {
    const Matrix3 R = so3_exp(axis.normalized() * angle);
    return {R, pivot - R * pivot};
}

std::vector<RigidTransform> tabletop_motions(const SceneSpec& scene, int n_steps, double yaw_step, double shift) {
    if (!scene.table) {
        throw DomainError("tabletop_motions: scene has no table");
    }
    const Vector3 n = scene.table->normal;
    const Vector3 e1 = any_perpendicular(n);
    const Vector3 e2 = n.cross(e1);
    std::vector<RigidTransform> motions;
    RigidTransform pose = scene.object_pose;
    for (int k = 0; k < n_steps; ++k) {
        const double phi = 2.0 * M_PI * k / n_steps;
        const Vector3 slide = shift * (std::cos(phi) * e1 + std::sin(phi) * e2);
        const RigidTransform yaw = rotation_about(n, yaw_step, pose.translation());
        const RigidTransform motion = RigidTransform(Matrix3::Identity(), slide) * yaw;
        motions.push_back(motion);
        pose = motion * pose;
    }
    return motions;
}

CameraModel default_camera() { return CameraModel::isotropic(160, 120, 140.0, 0.002, 0.1); }

SceneSpec tabletop_scene(TabletopObject object) {
    constexpr double tilt = 40.0 * M_PI / 180.0;
    constexpr double distance = 0.5;
    const Vector3 up(0.0, -std::cos(tilt), -std::sin(tilt));
    const Vector3 x_axis = Vector3::UnitX();
    const Vector3 y_axis = up.cross(x_axis);
    Matrix3 R;
    R.col(0) = x_axis;
    R.col(1) = y_axis;
    R.col(2) = up;
    const Vector3 anchor(0.0, 0.0, distance);

    SceneSpec scene;
    scene.object_pose = RigidTransform(R, anchor);
    scene.table = Plane{anchor, up, 0.45};

    const auto at = [](const Vector3& c) { return RigidTransform(Matrix3::Identity(), c); };
    // cylinder axis (z) laid along the object x axis
    const Matrix3 lay = so3_exp(Vector3(0.0, M_PI / 2.0, 0.0));
    switch (object) {
        case TabletopObject::Box:
            scene.object.push_back({BoxShape{Vector3(0.12, 0.08, 0.06)}, at(Vector3(0.0, 0.0, 0.03))});
            break;
        case TabletopObject::SquareBox:
            scene.object.push_back({BoxShape{Vector3(0.10, 0.11, 0.06)}, at(Vector3(0.0, 0.0, 0.03))});
            break;
        case TabletopObject::Tube:
            scene.object.push_back({CylinderShape{0.025, 0.16}, RigidTransform(lay, Vector3(0.0, 0.0, 0.025))});
            break;
        case TabletopObject::Flashlight:
            scene.object.push_back({CylinderShape{0.017, 0.13}, RigidTransform(lay, Vector3(-0.03, 0.0, 0.025))});
            scene.object.push_back({CylinderShape{0.026, 0.05}, RigidTransform(lay, Vector3(0.055, 0.0, 0.026))});
            break;
    }
    return scene;
}

}  // namespace maskreg
