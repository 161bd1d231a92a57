#include <cmath>

#include <gtest/gtest.h>

#include "maskreg/sensor.hpp"
#include "maskreg/synth.hpp"
#include "support/oracles.hpp"

using namespace maskreg;
using namespace maskreg::testing;

namespace {

constexpr double kSigma = 0.002;

// One pixel on the optical axis; neighbouring pixel centres are a full
// unit of w away, far outside any window.
DepthImage single_pixel(PixelState state, double depth) {
    CameraModel cam = CameraModel::isotropic(1, 1, 1.0, kSigma);
    cam.cx = 0.0;
    cam.cy = 0.0;
    return DepthImage(cam, {{state, state == PixelState::Unknown ? 0.0 : depth}});
}

// Fronto-parallel wall at z = 1 m filling the view.
DepthImage wall() {
    SceneSpec scene;
    scene.table = Plane{Vector3(0, 0, 1.0), Vector3(0, 0, -1.0), std::nullopt};
    return render(scene, default_camera(), 0, 0.0);
}

double sigma_r(const RayPoint& b, const RigidTransform& T, const Matrix3& noise) {
    return 1.0 / std::sqrt(likelihood_terms(b, T, noise).precision(2, 2));
}

}  // namespace

TEST(LikelihoodTerms, IdentityOnAxisExample) {
    const Matrix3 L = Matrix3::Identity() * kSigma * kSigma;
    const LikelihoodTerms t = likelihood_terms({0.0, 0.0, 1.0}, RigidTransform::identity(), L);
    const double p = 1.0 / (2.0 * kSigma * kSigma);
    EXPECT_LE((t.precision - p * Matrix3::Identity()).norm(), 1e-9 * p);
    EXPECT_LE((t.marginal_precision - p * Eigen::Matrix2d::Identity()).norm(), 1e-9 * p);
    EXPECT_LE((t.erf_direction - Vector3(0, 0, 1.0 / (2.0 * kSigma))).norm(), 1e-9 / kSigma);
    EXPECT_NEAR(t.k2, std::pow(2.0 * kSigma * kSigma, -1.5), 1e-9 * t.k2);
}

TEST(LikelihoodTerms, StructuralIdentities) {
    Rng rng(51);
    const Matrix3 L = Matrix3::Identity() * kSigma * kSigma;
    for (int i = 0; i < 300; ++i) {
        const RigidTransform T = random_transform(rng, 0.5, 0.1);
        const RayPoint b{uniform(rng, -0.4, 0.4), uniform(rng, -0.3, 0.3), uniform(rng, 0.4, 2.0)};
        const LikelihoodTerms t = likelihood_terms(b, T, L);
        const Matrix3& lam = t.precision;
        EXPECT_LE((lam - lam.transpose()).norm(), 1e-12 * lam.norm());
        // explicit marginalization of r out of Lambda
        const Eigen::Matrix2d schur = lam.topLeftCorner<2, 2>() - lam.topRightCorner<2, 1>() *
                                                                       lam.bottomLeftCorner<1, 2>() / lam(2, 2);
        EXPECT_LE((t.marginal_precision - schur).norm(), 1e-9 * schur.norm());
        const Eigen::Matrix2d cov_wh = t.covariance.topLeftCorner<2, 2>();
        EXPECT_LE((t.marginal_precision.inverse() - cov_wh).norm(), 1e-8 * cov_wh.norm());
        EXPECT_GT(t.marginal_precision.determinant(), 0.0);
        // K2 straight from its definition with the linearized M
        const Matrix3 M = linearized_cross_transform(b, T).M;
        EXPECT_NEAR(t.k2, 1.0 / std::sqrt((L + M * L * M.transpose()).determinant()), 1e-9 * t.k2);
        EXPECT_LE((t.erf_direction - Vector3(lam(2, 0), lam(2, 1), lam(2, 2)) / std::sqrt(2.0 * lam(2, 2))).norm(),
                  1e-12 * t.erf_direction.norm());
    }
}

TEST(PointLikelihood, MatchesQuadratureOracle) {
    Rng rng(52);
    const TabletopObject objects[] = {TabletopObject::Box, TabletopObject::Tube, TabletopObject::Flashlight,
                                      TabletopObject::SquareBox};
    int compared = 0;
    int rejected_both = 0;
    for (int cfg = 0; cfg < 120; ++cfg) {
        const SceneSpec scene_a = tabletop_scene(objects[cfg % 4]);
        const DepthImage mask = render(scene_a, default_camera(), static_cast<std::uint64_t>(cfg), kSigma);
        const RigidTransform T = random_transform(rng, 0.15, 0.02);
        SceneSpec scene_b = scene_a;
        scene_b.object_pose = T * scene_a.object_pose;
        const DepthImage img_b = render(scene_b, default_camera(), 1000u + static_cast<std::uint64_t>(cfg), kSigma);
        const auto& pts = img_b.object_points();
        RayPoint b = pts[static_cast<std::size_t>(rng() % pts.size())];
        b.w += uniform(rng, -0.5, 0.5) / 140.0;
        b.h += uniform(rng, -0.5, 0.5) / 140.0;
        b.r += uniform(rng, -3.0, 3.0) * kSigma;

        const auto closed = point_log_likelihood(b, mask, T);
        const OracleResult oracle = numeric_point_likelihood(b, mask, T);
        ASSERT_FALSE(oracle.behind);
        ASSERT_GT(oracle.pixels, 0);
        if (!closed) {
            const double k2 = likelihood_terms(b, T, mask.camera().noise).k2;
            EXPECT_LE(oracle.value, 1.001e-6 * k2);
            ++rejected_both;
            continue;
        }
        const double value = std::exp(*closed);
        EXPECT_LE(std::abs(value - oracle.value), 1e-3 * oracle.value) << "configuration " << cfg;
        ++compared;
    }
    EXPECT_GE(compared, 100);
    EXPECT_LE(rejected_both, 20);
}

TEST(PointLikelihood, OracleHalfMassAtZeroErfArgument) {
    const DepthImage measured = single_pixel(PixelState::Background, 1.0);
    const DepthImage unknown = single_pixel(PixelState::Unknown, 0.0);
    const RayPoint b{0.0, 0.0, 1.0};
    const double half = numeric_point_likelihood(b, measured, RigidTransform::identity()).value;
    const double full = numeric_point_likelihood(b, unknown, RigidTransform::identity()).value;
    EXPECT_NEAR(half / full, 0.5, 1e-9);
    // and the closed form: the single term is K2 (1 + erf(0)) = K2
    const double k2 = likelihood_terms(b, RigidTransform::identity(), measured.camera().noise).k2;
    EXPECT_NEAR(*point_log_likelihood(b, measured, RigidTransform::identity()), std::log(k2), 1e-12);
}

TEST(PointLikelihood, ExactHitIsAtLeastK2) {
    const DepthImage img = render(tabletop_scene(TabletopObject::Box), default_camera(), 0, 0.0);
    const RigidTransform I = RigidTransform::identity();
    for (std::size_t i = 0; i < img.object_points().size(); i += 17) {
        const RayPoint& b = img.object_points()[i];
        const double k2 = likelihood_terms(b, I, img.camera().noise).k2;
        const auto lp = point_log_likelihood(b, img, I);
        ASSERT_TRUE(lp.has_value());
        EXPECT_GE(*lp, std::log(k2));
    }
}

TEST(PointLikelihood, FiveSigmaInFrontOfASinglePixelIsRejected) {
    const DepthImage img = single_pixel(PixelState::Background, 1.0);
    const RigidTransform I = RigidTransform::identity();
    const double s = sigma_r({0.0, 0.0, 1.0}, I, img.camera().noise);
    EXPECT_FALSE(point_log_likelihood({0.0, 0.0, 1.0 - 5.0 * s}, img, I).has_value());
    // the factor itself: (1 + erf(-5 / sqrt 2)) < 1e-6
    EXPECT_LT(std::erfc(5.0 / std::sqrt(2.0)), 1e-6);
    EXPECT_TRUE(point_log_likelihood({0.0, 0.0, 1.0 + 5.0 * s}, img, I).has_value());
}

TEST(PointLikelihood, MonotoneFreeSpaceSuppression) {
    const DepthImage img = single_pixel(PixelState::Object, 1.0);
    const RigidTransform I = RigidTransform::identity();
    PointLikelihoodConfig cfg;
    cfg.reject_floor = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double r = 1.02; r >= 0.99; r -= 0.0005) {
        const auto lp = point_log_likelihood({0.0, 0.0, r}, img, I, cfg);
        ASSERT_TRUE(lp.has_value());
        EXPECT_LT(*lp, prev);
        prev = *lp;
    }
}

TEST(PointLikelihood, WallSuppressionAgainstBehindValue) {
    const DepthImage img = wall();
    const RigidTransform I = RigidTransform::identity();
    const int col = 70;
    const int row = 50;
    const double depth = img.at(col, row).depth;
    const RayPoint at = img.pixel_ray(col, row, depth);
    const double s = sigma_r(at, I, img.camera().noise);
    PointLikelihoodConfig no_floor;
    no_floor.reject_floor = 0.0;
    const double front = *point_log_likelihood(img.pixel_ray(col, row, depth - 5.0 * s), img, I, no_floor);
    const double behind = *point_log_likelihood(img.pixel_ray(col, row, depth + 5.0 * s), img, I, no_floor);
    EXPECT_LT(std::exp(front - behind), 1e-6);
    EXPECT_FALSE(point_log_likelihood(img.pixel_ray(col, row, depth - 5.0 * s), img, I).has_value());
}

TEST(PointLikelihood, UnknownPixelsAreSaturatedOrIgnored) {
    const DepthImage img = DepthImage::empty(default_camera());
    const RigidTransform I = RigidTransform::identity();
    const RayPoint b{0.01, -0.02, 0.8};
    const auto lp = point_log_likelihood(b, img, I);
    ASSERT_TRUE(lp.has_value());
    // the same window of Gaussian weights, each times 2
    const LikelihoodTerms t = likelihood_terms(b, I, img.camera().noise);
    const CameraModel& cam = img.camera();
    double sum = 0.0;
    for (int row = -5; row < cam.height + 5; ++row) {
        for (int col = -5; col < cam.width + 5; ++col) {
            const Eigen::Vector2d d(b.w - cam.col_to_w(col), b.h - cam.row_to_h(row));
            const double m2 = d.dot(t.marginal_precision * d);
            if (m2 <= 36.0) sum += 2.0 * std::exp(-0.5 * m2);
        }
    }
    EXPECT_NEAR(*lp, std::log(t.k2 * sum), 1e-12);
    PointLikelihoodConfig ignore;
    ignore.unknown = UnknownPolicy::Ignore;
    EXPECT_FALSE(point_log_likelihood(b, img, I, ignore).has_value());
}

TEST(PointLikelihood, BehindCameraIsRejected) {
    const DepthImage img = wall();
    const RigidTransform T(Matrix3::Identity(), Vector3(0, 0, 2.0));
    EXPECT_FALSE(point_log_likelihood({0.0, 0.0, 1.0}, img, T).has_value());
}

TEST(PointLikelihood, CroppingAnUnknownBorderChangesNothing) {
    DepthImage full = render(tabletop_scene(TabletopObject::Tube), default_camera(), 2, kSigma);
    const CameraModel& cam = full.camera();
    std::vector<PixelObservation> grid = full.grid();
    for (int row = 0; row < cam.height; ++row) {
        for (int col = 0; col < cam.width; ++col) {
            if (row < 3 || col < 3 || row >= cam.height - 3 || col >= cam.width - 3) {
                grid[full.index(col, row)] = {};
            }
        }
    }
    const DepthImage bordered(cam, grid);
    CameraModel small_cam = cam;
    small_cam.width -= 6;
    small_cam.height -= 6;
    small_cam.cx -= 3.0;
    small_cam.cy -= 3.0;
    std::vector<PixelObservation> inner;
    for (int row = 3; row < cam.height - 3; ++row) {
        for (int col = 3; col < cam.width - 3; ++col) {
            inner.push_back(grid[full.index(col, row)]);
        }
    }
    const DepthImage cropped(small_cam, inner);
    Rng rng(53);
    for (int i = 0; i < 200; ++i) {
        const RigidTransform T = random_transform(rng, 0.1, 0.02);
        const RayPoint& b = bordered.object_points()[static_cast<std::size_t>(rng() % bordered.object_count())];
        const auto a = point_log_likelihood(b, bordered, T);
        const auto c = point_log_likelihood(b, cropped, T);
        ASSERT_EQ(a.has_value(), c.has_value());
        if (a) {
            EXPECT_NEAR(*a, *c, 1e-12 * std::abs(*a) + 1e-12);
        }
    }
}

TEST(CloudLikelihood, Properties) {
    const DepthImage img = render(tabletop_scene(TabletopObject::Box), default_camera(), 0, 0.0);
    const RigidTransform I = RigidTransform::identity();
    const auto& pts = img.object_points();
    EXPECT_THROW(cloud_log_likelihood({}, img, I), DomainError);
    EXPECT_TRUE(cloud_log_likelihood(pts, img, I).has_value());

    const std::vector<RayPoint> two{pts[3], pts[40]};
    const double sum = *point_log_likelihood(two[0], img, I) + *point_log_likelihood(two[1], img, I);
    EXPECT_NEAR(*cloud_log_likelihood(two, img, I), sum, 1e-12 * std::abs(sum));

    // whole cloud pulled 5 cm towards the camera: in front of everything
    const RigidTransform closer(Matrix3::Identity(), Vector3(0, 0, 0.05));
    EXPECT_FALSE(cloud_log_likelihood(pts, img, closer).has_value());
}

TEST(CloudLikelihood, WindowTruncationIsNegligible) {
    const DepthImage a = render(tabletop_scene(TabletopObject::Flashlight), default_camera(), 1, kSigma);
    SceneSpec moved = tabletop_scene(TabletopObject::Flashlight);
    const RigidTransform T = rotation_about(moved.table->normal, 0.05, moved.object_pose.translation());
    moved.object_pose = T * moved.object_pose;
    const DepthImage b = render(moved, default_camera(), 2, kSigma);
    const auto cloud = subsample_object(b, 200, 3);
    PointLikelihoodConfig wide;
    wide.window_radius = 12.0;
    const double base = *cloud_log_likelihood(cloud, a, T);
    const double big = *cloud_log_likelihood(cloud, a, T, wide);
    EXPECT_LT(std::abs(big - base), 1e-6 * std::abs(base));
}

TEST(CloudLikelihood, JointClassificationIsSymmetricUnderSwap) {
    const SceneSpec scene = tabletop_scene(TabletopObject::Box);
    const DepthImage a = render(scene, default_camera(), 0, 0.0);
    const DepthImage b = render(scene, default_camera(), 0, 0.0);
    const auto pa = subsample_object(a, 100, 1);
    const auto pb = subsample_object(b, 100, 2);
    Rng rng(54);
    int accepted = 0;
    for (int i = 0; i < 200; ++i) {
        const RigidTransform T = random_transform(rng, 0.03, 0.004);
        const bool ab = cloud_log_likelihood(pb, a, T).has_value() &&
                        cloud_log_likelihood(pa, b, T.inverse()).has_value();
        const bool ba = cloud_log_likelihood(pa, b, T.inverse()).has_value() &&
                        cloud_log_likelihood(pb, a, T).has_value();
        EXPECT_EQ(ab, ba);
        accepted += ab;
    }
    EXPECT_GT(accepted, 0);
    EXPECT_LT(accepted, 200);
}

TEST(LikelihoodConfig, Validation) {
    PointLikelihoodConfig cfg;
    cfg.window_radius = 0.0;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg.window_radius = 4.0;
    cfg.reject_floor = -1.0;
    EXPECT_THROW(cfg.validate(), DomainError);
}
