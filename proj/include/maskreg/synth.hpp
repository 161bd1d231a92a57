#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "maskreg/depth_image.hpp"
#include "maskreg/geometry.hpp"

namespace maskreg {

/// Axis-aligned box centered at the primitive origin; `size` holds full edge lengths.
struct BoxShape {
    Vector3 size = Vector3::Constant(0.1);
};

/// Capped cylinder along the primitive z axis, centered at the origin.
struct CylinderShape {
    double radius = 0.02;
    double length = 0.1;
};

struct SphereShape {
    double radius = 0.05;
};

struct Primitive {
    std::variant<BoxShape, CylinderShape, SphereShape> shape;
    RigidTransform pose;  // primitive frame -> object frame

    /// Throws DomainError on non-positive dimensions.
    void validate() const;
};

/// Plane n . (p - point) = 0 in the camera frame; `normal` points towards the camera side.
struct Plane {
    Vector3 point = Vector3::Zero();
    Vector3 normal = Vector3::UnitZ();
    /// Finite table: pixels hitting the plane farther than this from `point`
    /// see void. Infinite when unset.
    std::optional<double> extent;
};

struct SceneSpec {
    std::vector<Primitive> object;  // union of primitives, object frame
    RigidTransform object_pose;     // object frame -> camera frame
    std::optional<Plane> table;
    double max_range = 4.0;         // rays hitting nothing closer are UNKNOWN

    void validate() const;
};

/// Ray/primitive intersection: smallest t > 0 with origin + t dir on the
/// surface, both given in the primitive frame.
std::optional<double> intersect(const Primitive& prim, const Vector3& origin, const Vector3& dir);

struct RenderStats {
    std::size_t object_pixels = 0;
    std::size_t background_pixels = 0;
    std::size_t unknown_pixels = 0;
};

/// Ray-casts the scene. Measured depths get additive N(0, sigma^2) noise on r
/// (one independent stream per pixel, derived from noise_seed) and are
/// rounded to float precision so images survive a file round trip unchanged.
DepthImage render(const SceneSpec& scene, const CameraModel& camera, std::uint64_t noise_seed, double sigma,
                  RenderStats* stats = nullptr);

struct SequenceFrame {
    DepthImage image;
    RigidTransform pose;  // object pose in the camera frame
};

/// Frame 0 uses scene.object_pose; frame k+1 uses motions[k] * pose_k.
/// Each frame draws its own noise stream from seed.
std::vector<SequenceFrame> make_sequence(const SceneSpec& scene, const std::vector<RigidTransform>& motions,
                                         const CameraModel& camera, double sigma, std::uint64_t seed);

/// Ground-truth relative transforms pose_{k+1} * pose_k^-1 (maps frame k points to frame k+1).
std::vector<RigidTransform> relative_ground_truth(const std::vector<SequenceFrame>& frames);

/// Rotation about `axis` (unit) through `pivot`.
RigidTransform rotation_about(const Vector3& axis, double angle, const Vector3& pivot);

/// Tabletop pushes: each step yaws the object by `yaw_step` about the table
/// normal through its current origin, then slides it by `shift` in the plane.
/// Slide directions walk once around a circle so n_steps steps return the
/// object to its start.
std::vector<RigidTransform> tabletop_motions(const SceneSpec& scene, int n_steps, double yaw_step, double shift);

enum class TabletopObject {
    Box,
    Tube,
    Flashlight,
    /// Near-square box, footprint 10 x 11 cm.
    SquareBox,
};

/// Object on a finite table, viewed from 0.5 m with the camera tilted 40 degrees down.
SceneSpec tabletop_scene(TabletopObject object);

/// 160 x 120, focal 140 px, isotropic sigma = 0.002.
CameraModel default_camera();

}  // namespace maskreg
