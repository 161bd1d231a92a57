// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "maskreg/evaluation.hpp"
#include "maskreg/io.hpp"
#include "maskreg/posegraph.hpp"
#include "maskreg/registrar.hpp"
#include "maskreg/sensor.hpp"
#include "maskreg/synth.hpp"
#include "support/oracles.hpp"
#include "support/process.hpp"

using namespace maskreg;
using namespace maskreg::testing;
namespace fs = std::filesystem;

namespace {

constexpr double kSigma = 0.002;
constexpr double kDeg = M_PI / 180.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): " << o.detail
              << std::endl;
    failures += o.pass ? 0 : 1;
}

Vector3 object_centroid(const DepthImage& img) { return cloud_centroid(img.object_points()); }

// ---------------------------------------------------------------------------

Outcome likelihood_oracle() {
    const auto t0 = Clock::now();
    Rng rng(1001);
    const TabletopObject objects[] = {TabletopObject::Box, TabletopObject::Tube, TabletopObject::Flashlight,
                                      TabletopObject::SquareBox};
    int compared = 0;
    int agree = 0;
    double worst = 0.0;
    for (int cfg = 0; compared < 150 && cfg < 400; ++cfg) {
        const SceneSpec scene_a = tabletop_scene(objects[cfg % 4]);
        const DepthImage mask = render(scene_a, default_camera(), static_cast<std::uint64_t>(cfg), kSigma);
        const RigidTransform T = random_transform(rng, 0.15, 0.02);
        SceneSpec scene_b = scene_a;
        scene_b.object_pose = T * scene_a.object_pose;
        const DepthImage img_b = render(scene_b, default_camera(), 5000u + static_cast<std::uint64_t>(cfg), kSigma);
        const auto& pts = img_b.object_points();
        RayPoint b = pts[static_cast<std::size_t>(rng() % pts.size())];
        b.w += uniform(rng, -0.5, 0.5) / default_camera().focal;
        b.h += uniform(rng, -0.5, 0.5) / default_camera().focal;
        b.r += uniform(rng, -3.0, 3.0) * kSigma;
        const auto closed = point_log_likelihood(b, mask, T);
        if (!closed) {
            continue;
        }
        const OracleResult oracle = numeric_point_likelihood(b, mask, T);
        const double rel = std::abs(std::exp(*closed) - oracle.value) / oracle.value;
        worst = std::max(worst, rel);
        agree += rel <= 1e-3;
        ++compared;
    }
    const double elapsed = seconds_since(t0);
    return {compared >= 100 && agree == compared && elapsed < 60.0,
            std::to_string(compared) + " configurations, max relative difference " + fmt("%.2e", worst) + ", " +
                fmt("%.1f", elapsed) + " s"};
}

// ---------------------------------------------------------------------------

Outcome jacobians() {
    Rng rng(1002);
    const auto rel = [](const Matrix3& a, const Matrix3& b) { return (a - b).norm() / b.norm(); };
    double worst_q = 0.0;
    double worst_m = 0.0;
    double min_slope = 1e9;
    const auto to_ray_vec = [](const Vector3& p) { return to_ray(p).vec(); };
    for (int i = 0; i < 1000; ++i) {
        const double z = uniform(rng, 0.3, 3.0);
        const Vector3 p(uniform(rng, -0.7, 0.7) * z, uniform(rng, -0.5, 0.5) * z, z);
        worst_q = std::max(worst_q, rel(ray_jacobian(p), numeric_jacobian(to_ray_vec, p, 1e-6)));

        const RigidTransform T = random_transform(rng, 0.6, 0.1);
        const RayPoint b = to_ray(p);
        const auto lin = linearized_cross_transform(b, T);
        const auto cross = [&T](const Vector3& s) { return cross_transform(RayPoint::from_vec(s), T).vec(); };
        worst_m = std::max(worst_m, rel(lin.M, numeric_jacobian(cross, lin.anchor.vec(), 1e-6)));

        if (i % 10 == 0) {
            const Vector3 dir = random_unit(rng);
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            int n = 0;
            for (double eps = 1e-2; eps > 1e-4; eps *= 0.5, ++n) {
                const Vector3 s = lin.anchor.vec() + eps * dir;
                const double res = (cross(s) - (b.vec() + lin.M * (eps * dir))).norm();
                sx += std::log(eps);
                sy += std::log(res);
                sxx += std::log(eps) * std::log(eps);
                sxy += std::log(eps) * std::log(res);
            }
            min_slope = std::min(min_slope, (n * sxy - sx * sy) / (n * sxx - sx * sx));
        }
    }
    return {worst_q <= 1e-6 && worst_m <= 1e-6 && min_slope >= 1.9,
            "1000 points, ray jacobian " + fmt("%.1e", worst_q) + ", cross-transform " + fmt("%.1e", worst_m) +
                ", min residual order " + fmt("%.3f", min_slope)};
}

// ---------------------------------------------------------------------------

Outcome self_registration() {
    const DepthImage img = render(tabletop_scene(TabletopObject::Box), default_camera(), 0, 0.0);
    const Vector3 centroid = object_centroid(img);
    const PriorSpec prior{Bounded6DofPrior{0.01, 10.0 * kDeg}};
    RegistrationConfig rc;
    rc.n_samples = 10000;
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        rc.seed = seed;
        const TransformPosterior post = register_pair(img, img, prior, rc);
        const double rot = rotation_error_deg(post.mean, RigidTransform::identity());
        const double mm = translation_error_mm(post.mean, RigidTransform::identity(), centroid);
        ok &= rot <= 0.5 && mm <= 2.0;
        detail += (seed ? "; " : "") + std::string("seed ") + std::to_string(seed) + " " + fmt("%.3f", rot) +
                  " deg " + fmt("%.2f", mm) + " mm";
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------

Outcome tabletop_benchmark() {
    const SceneConfig sc;  // 14 frames, 2 pi / 14 yaw steps, sigma 0.002
    RegistrationConfig rc;
    rc.n_samples = 100000;
    rc.n_points = 200;
    rc.threads = 1;
    bool ok = true;
    std::string detail;
    double slowest = 0.0;
    const std::pair<TabletopObject, const char*> objects[] = {
        {TabletopObject::Box, "box"}, {TabletopObject::Tube, "tube"}, {TabletopObject::Flashlight, "flashlight"}};
    for (const auto& [object, name] : objects) {
        const SceneSpec scene = tabletop_scene(object);
        const auto frames =
            make_sequence(scene, tabletop_motions(scene, sc.frames - 1, sc.yaw_step, sc.shift), sc.camera, sc.sigma, 11);
        const auto truth = relative_ground_truth(frames);
        std::vector<double> errs;
        for (std::size_t k = 0; k < truth.size(); ++k) {
            rc.seed = 200 + k;
            const TransformPosterior post = register_pair(frames[k].image, frames[k + 1].image, tabletop_prior(), rc);
            errs.push_back(rotation_error_deg(post.mean, truth[k]));
            slowest = std::max(slowest, post.wall_seconds);
        }
        const double med = quantile(errs, 0.5);
        const double worst = *std::max_element(errs.begin(), errs.end());
        ok &= med <= 5.0 && worst <= 15.0;
        detail += std::string(name) + " median " + fmt("%.2f", med) + " max " + fmt("%.2f", worst) + " deg; ";
    }
    ok &= slowest <= 5.0;
    return {ok, detail + "slowest pair " + fmt("%.2f", slowest) + " s"};
}

// ---------------------------------------------------------------------------

Outcome mask_disambiguation() {
    const SceneSpec scene = tabletop_scene(TabletopObject::SquareBox);
    const Vector3& n = scene.table->normal;
    const Vector3 centre = scene.object_pose * Vector3(0.0, 0.0, 0.03);
    const RigidTransform truth = rotation_about(n, 90.0 * kDeg, centre);
    const std::vector<RigidTransform> symmetry{rotation_about(n, M_PI, centre)};

    PlanarPrior pl;
    pl.normal = n;
    pl.plane_point = scene.table->point;
    pl.max_yaw = 100.0 * kDeg;
    pl.max_shift = 0.04;
    RegistrationConfig rc;
    rc.n_samples = 100000;

    int icp_wrong = 0;
    int mask_right = 0;
    double icp_min_err = 1e9;
    std::string mask_errs;
    for (std::uint64_t run = 0; run < 10; ++run) {
        const auto frames = make_sequence(scene, {truth}, default_camera(), kSigma, 300 + run);
        const DepthImage& a = frames[0].image;
        const DepthImage& b = frames[1].image;
        // centroids aligned, no rotation: the other near-square face pairing
        const RigidTransform init(Matrix3::Identity(), object_centroid(b) - object_centroid(a));
        const auto pa = cartesian_cloud(subsample_object(a, 200, run));
        const auto pb = cartesian_cloud(subsample_object(b, 200, ~run));
        const IcpResult icp_res = icp(pa, pb, init);
        const double icp_err = rotation_error_modulo_deg(icp_res.transform, truth, symmetry);
        icp_min_err = std::min(icp_min_err, icp_err);
        icp_wrong += icp_err > 45.0;

        rc.seed = 400 + run;
        const TransformPosterior post = register_pair(a, b, PriorSpec{pl}, rc);
        const double err = rotation_error_modulo_deg(post.mean, truth, symmetry);
        mask_right += err < 45.0;
        mask_errs += (run ? " " : "") + fmt("%.1f", err);
    }
    return {icp_wrong == 10 && mask_right >= 9,
            "ICP wrong mode " + std::to_string(icp_wrong) + "/10 (smallest error " + fmt("%.1f", icp_min_err) +
                " deg); mask-aware correct " + std::to_string(mask_right) + "/10 (errors " + mask_errs + " deg)"};
}

// ---------------------------------------------------------------------------

Outcome free_space() {
    // background observed at the same range in every pixel, so the point is
    // 5 sigma_r in front of every surface its window can see
    const CameraModel cam = default_camera();
    const DepthImage wall(cam, std::vector<PixelObservation>(static_cast<std::size_t>(cam.width * cam.height),
                                                             {PixelState::Background, 1.0}));
    const RigidTransform I = RigidTransform::identity();
    PointLikelihoodConfig no_floor;
    no_floor.reject_floor = 0.0;

    double worst_ratio = 0.0;
    bool all_rejected = true;
    Rng rng(1006);
    std::vector<RayPoint> surface;
    for (int i = 0; i < 50; ++i) {
        const int col = 10 + static_cast<int>(rng() % 140);
        const int row = 10 + static_cast<int>(rng() % 100);
        const double depth = wall.at(col, row).depth;
        const RayPoint at = wall.pixel_ray(col, row, depth);
        const double sigma_r = 1.0 / std::sqrt(likelihood_terms(at, I, wall.camera().noise).precision(2, 2));
        const RayPoint front = wall.pixel_ray(col, row, depth - 5.0 * sigma_r);
        const RayPoint behind = wall.pixel_ray(col, row, depth + 5.0 * sigma_r);
        const double lf = *point_log_likelihood(front, wall, I, no_floor);
        const double lb = *point_log_likelihood(behind, wall, I, no_floor);
        worst_ratio = std::max(worst_ratio, std::exp(lf - lb));
        surface.push_back(at);
        std::vector<RayPoint> cloud = surface;
        cloud.push_back(front);
        all_rejected &= !cloud_log_likelihood(cloud, wall, I).has_value();
    }
    const bool surface_ok = cloud_log_likelihood(surface, wall, I).has_value();
    return {worst_ratio < 1e-6 && all_rejected && surface_ok,
            "50 pixels, worst front/behind ratio " + fmt("%.2e", worst_ratio) +
                (all_rejected ? ", every cloud with the point rejected" : ", some cloud accepted") +
                (surface_ok ? ", surface-only cloud accepted" : ", surface-only cloud rejected")};
}

// ---------------------------------------------------------------------------

Outcome loop_closure() {
    const SceneSpec scene = tabletop_scene(TabletopObject::Box);
    const SceneConfig sc;
    const auto frames =
        make_sequence(scene, tabletop_motions(scene, sc.frames - 1, sc.yaw_step, sc.shift), sc.camera, sc.sigma, 21);
    const std::size_t n = frames.size();
    RegistrationConfig rc;
    rc.n_samples = 10000;
    std::mt19937_64 noise_rng(1007);
    std::normal_distribution<double> n01;

    PoseGraph graph;
    for (std::size_t k = 0; k < n; ++k) graph.add_node(k, RigidTransform::identity());
    std::vector<PoseEdge> edges;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = (k + 1) % n;
        rc.seed = 500 + k;
        const TransformPosterior post = register_pair(frames[k].image, frames[j].image, tabletop_prior(), rc);
        // T maps frame k into frame j; noise enters on the right in the tangent space at T
        const RigidTransform truth = frames[j].pose * frames[k].pose.inverse();
        Eigen::SelfAdjointEigenSolver<Matrix6> eig(post.covariance);
        const Vector6 root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        Vector6 z;
        for (int i = 0; i < 6; ++i) z[i] = n01(noise_rng);
        const RigidTransform noisy = truth * exp6(eig.eigenvectors() * root.cwiseProduct(z));
        edges.push_back(edge_from_registration(k, j, noisy, post.covariance));
        graph.add_edge(edges.back());
    }
    const auto init = dead_reckoning(graph);
    PoseGraph seeded;
    for (std::size_t k = 0; k < n; ++k) seeded.add_node(k, init[k]);
    for (const PoseEdge& e : edges) seeded.add_edge(e);
    const OptimizationResult res = optimize(seeded);

    const PoseEdge& loop = edges.back();
    const double before = edge_mahalanobis(loop, init[loop.from], init[loop.to]);
    const double after = edge_mahalanobis(loop, res.poses[loop.from], res.poses[loop.to]);
    bool monotone = true;
    for (std::size_t k = 1; k < res.chi2_trace.size(); ++k) monotone &= res.chi2_trace[k] <= res.chi2_trace[k - 1];
    std::string trace;
    for (double c : res.chi2_trace) trace += (trace.empty() ? "" : " ") + fmt("%.4g", c);
    return {before > 0.0 && after <= 0.1 * before && monotone,
            "loop residual " + fmt("%.4g", before) + " -> " + fmt("%.4g", after) + " (ratio " +
                fmt("%.3f", after / before) + "), chi2 trace [" + trace + "]"};
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), read_file(e.path()));
    }
    std::sort(files.begin(), files.end());
    return files;
}

Outcome cli_determinism(const fs::path& exe) {
    const fs::path root = fresh_dir("maskreg_acceptance_cli");
    std::ofstream(root / "run.json") << R"({"registration": {"samples": 2000, "points": 100}})";
    const std::string cfg = (root / "run.json").string();

    const auto frame = [&](const fs::path& seq, int k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "frame_%03d.mrd", k);
        return (seq / buf).string();
    };
    const auto run = [&](const std::string& tag, const std::string& threads) -> int {
        const fs::path out = root / tag;
        fs::create_directories(out);
        const fs::path seq = out / "synth";
        int rc = run_process(exe, {"synth", "--config", cfg, "--seed", "9", "--threads", threads, "--out", seq.string()});
        if (rc) return rc;
        const std::vector<std::string> pair{frame(seq, 0), frame(seq, 1)};
        rc = run_process(exe, {"register", pair[0], pair[1], "--config", cfg, "--seed", "9", "--threads", threads,
                               "--out", (out / "register.json").string(), "--samples-csv",
                               (out / "samples.csv").string()});
        if (rc) return rc;
        rc = run_process(exe, {"icp", pair[0], pair[1], "--config", cfg, "--seed", "9", "--threads", threads,
                               "--out", (out / "icp.json").string()});
        if (rc) return rc;
        std::vector<std::string> seq_frames;
        for (int k = 0; k < 14; ++k) seq_frames.push_back(frame(seq, k));
        std::vector<std::string> eval{"eval"};
        eval.insert(eval.end(), seq_frames.begin(), seq_frames.end());
        for (const std::string& a : {std::string("--gt"), (seq / "ground_truth.csv").string(), std::string("--config"),
                                     cfg, std::string("--seed"), std::string("9"), std::string("--threads"), threads,
                                     std::string("--out"), (out / "eval").string()}) {
            eval.push_back(a);
        }
        rc = run_process(exe, eval);
        if (rc) return rc;
        std::vector<std::string> loop{"loop-close"};
        loop.insert(loop.end(), seq_frames.begin(), seq_frames.end());
        for (const std::string& a : {std::string("--config"), cfg, std::string("--seed"), std::string("9"),
                                     std::string("--threads"), threads, std::string("--out"),
                                     (out / "loop").string()}) {
            loop.push_back(a);
        }
        return run_process(exe, loop);
    };
    const int rc_a = run("a", "1");
    const int rc_b = run("b", "1");
    const int rc_c = run("c", "3");
    if (rc_a || rc_b || rc_c) {
        return {false, "a command failed (exit codes " + std::to_string(rc_a) + ", " + std::to_string(rc_b) + ", " +
                           std::to_string(rc_c) + ")"};
    }
    const auto a = snapshot(root / "a");
    const auto b = snapshot(root / "b");
    const auto c = snapshot(root / "c");
    const bool same = a == b && a == c && a.size() >= 24;
    std::string detail = std::to_string(a.size()) + " output files from synth, register, icp, eval, loop-close; ";
    detail += same ? "identical across two runs and --threads 1/3" : "outputs differ";
    return {same, detail};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"likelihood oracle", likelihood_oracle},
        {"jacobians", jacobians},
        {"self-registration", self_registration},
        {"tabletop benchmark", tabletop_benchmark},
        {"mask disambiguation", mask_disambiguation},
        {"free-space suppression", free_space},
        {"loop closure", loop_closure},
        {"cli determinism", [] { return cli_determinism(MASKREG_CLI_PATH); }},
    };
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        o.detail += " [" + fmt("%.1f", seconds_since(t0)) + " s]";
        report(static_cast<int>(i + 1), criteria[i].first, o);
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
