// maskreg command-line interface: synth, register, icp, eval, loop-close.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maskreg/evaluation.hpp"
#include "maskreg/io.hpp"
#include "maskreg/registrar.hpp"
#include "maskreg/synth.hpp"

namespace fs = std::filesystem;
using namespace maskreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitRejected = 3;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<std::size_t> points;
    std::optional<unsigned> threads;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, const std::string& out_help) {
    cmd->add_option("--config", f.config, "JSON run configuration");
    cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
    cmd->add_option("--samples", f.samples, "prior samples per registration")->check(CLI::PositiveNumber);
    cmd->add_option("--points", f.points, "subsampled object points per cloud")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", f.threads, "worker threads for sample evaluation")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, out_help);
}

RunConfig resolve_config(const CommonFlags& f) {
    RunConfig cfg = f.config.empty() ? parse_run_config("{}") : load_run_config(f.config);
    if (f.seed) cfg.registration.seed = *f.seed;
    if (f.samples) cfg.registration.n_samples = *f.samples;
    if (f.points) cfg.registration.n_points = *f.points;
    if (f.threads) cfg.registration.threads = *f.threads;
    cfg.registration.validate();
    return cfg;
}

std::vector<fs::path> image_paths(const RunConfig& cfg, const std::vector<std::string>& positional) {
    std::vector<fs::path> paths;
    for (const std::string& p : positional) {
        paths.emplace_back(p);
    }
    return paths.empty() ? cfg.images : paths;
}

std::vector<DepthImage> load_frames(const std::vector<fs::path>& paths) {
    std::vector<DepthImage> frames;
    for (const fs::path& p : paths) {
        frames.push_back(read_mrd(p));
    }
    return frames;
}

void write_text(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) {
        throw IoError("cannot write " + out);
    }
    f << text;
    if (!f.flush()) {
        throw IoError("write failed for " + out);
    }
}

fs::path out_dir(const std::string& out) {
    const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
    return dir;
}

std::string frame_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%03zu.mrd", k);
    return buf;
}

int run_synth(const CommonFlags& f) {
    const RunConfig cfg = resolve_config(f);
    const fs::path dir = out_dir(f.out);
    const auto frames = make_sequence(cfg.scene.scene(), cfg.scene.motions(), cfg.scene.camera, cfg.scene.sigma,
                                      cfg.registration.seed);
    std::vector<GroundTruthRow> rows;
    const auto rel = relative_ground_truth(frames);
    for (std::size_t k = 0; k < rel.size(); ++k) {
        rows.push_back({k, k + 1, rel[k]});
    }
    for (std::size_t k = 0; k < frames.size(); ++k) {
        write_mrd(dir / frame_name(k), frames[k].image);
    }
    write_ground_truth(dir / "ground_truth.csv", rows);
    std::cerr << "synth: wrote " << frames.size() << " frames to " << dir.string() << "\n";
    return kExitOk;
}

int run_register(const CommonFlags& f, const std::vector<std::string>& images, const std::string& samples_csv) {
    const RunConfig cfg = resolve_config(f);
    const auto paths = image_paths(cfg, images);
    if (paths.size() != 2) {
        throw DomainError("register: expected exactly two images");
    }
    const DepthImage a = read_mrd(paths[0]);
    const DepthImage b = read_mrd(paths[1]);
    const TransformPosterior post = register_pair(a, b, cfg.prior, cfg.registration);
    write_text(f.out, posterior_report_json(post));
    if (!samples_csv.empty()) {
        write_samples_csv(samples_csv, post);
    } else if (cfg.samples_csv) {
        write_samples_csv(*cfg.samples_csv, post);
    }
    std::cerr << "register: wall time " << post.wall_seconds << " s, ESS " << post.effective_sample_size
              << ", rejected " << post.rejected_count << "/" << post.evaluated_count << "\n";
    return kExitOk;
}

int run_icp(const CommonFlags& f, const std::vector<std::string>& images) {
    const RunConfig cfg = resolve_config(f);
    const auto paths = image_paths(cfg, images);
    if (paths.size() != 2) {
        throw DomainError("icp: expected exactly two images");
    }
    const DepthImage a = read_mrd(paths[0]);
    const DepthImage b = read_mrd(paths[1]);
    const std::uint64_t seed = cfg.registration.seed;
    const auto pa = cartesian_cloud(subsample_object(a, cfg.registration.n_points, seed));
    const auto pb = cartesian_cloud(subsample_object(b, cfg.registration.n_points, ~seed));
    const IcpResult res = icp(pa, pb, cfg.icp_init, cfg.icp);
    write_text(f.out, icp_report_json(res));
    return kExitOk;
}

int run_eval(const CommonFlags& f, const std::vector<std::string>& images, const std::string& gt_flag) {
    const RunConfig cfg = resolve_config(f);
    const auto paths = image_paths(cfg, images);
    const fs::path gt_path = !gt_flag.empty() ? fs::path(gt_flag) : cfg.ground_truth.value_or(fs::path());
    if (gt_path.empty()) {
        throw DomainError("eval: no ground truth given");
    }
    const auto frames = load_frames(paths);
    const auto rows = read_ground_truth(gt_path);
    if (frames.size() < 2 || rows.size() + 1 != frames.size()) {
        throw DomainError("eval: " + std::to_string(rows.size()) + " ground-truth rows for " +
                          std::to_string(frames.size()) + " frames");
    }
    std::vector<GroundTruthPair> truth;
    for (const GroundTruthRow& r : rows) {
        truth.push_back({r.from, r.to, r.transform});
    }
    const auto errors = evaluate_sequence(frames, truth, cfg.prior, cfg.registration, cfg.icp, cfg.icp_init);
    const auto summaries = summarize(errors);
    const fs::path dir = out_dir(f.out);
    write_text((dir / "errors.csv").string(), errors_csv(errors));
    write_text((dir / "summary.csv").string(), summary_csv(summaries));
    return kExitOk;
}

int run_loop_close(const CommonFlags& f, const std::vector<std::string>& images, const std::string& graph_flag) {
    const RunConfig cfg = resolve_config(f);
    const auto paths = image_paths(cfg, images);
    const auto frames = load_frames(paths);
    std::optional<fs::path> graph_path = cfg.graph;
    if (!graph_flag.empty()) {
        graph_path = graph_flag;
    }
    PoseGraph graph;
    if (graph_path) {
        graph = read_graph(*graph_path);
    } else if (!frames.empty()) {
        graph = build_sequence_graph(frames, cfg.prior, cfg.registration, cfg.close_loop);
    } else {
        throw DomainError("loop-close: need a graph file or a frame sequence");
    }
    if (!frames.empty() && frames.size() != graph.nodes().size()) {
        throw DomainError("loop-close: frame count does not match node count");
    }
    const OptimizationResult res = optimize(graph, cfg.optimizer);

    const fs::path dir = out_dir(f.out);
    write_graph(dir / "graph.txt", graph);
    std::vector<std::size_t> ids;
    for (const PoseNode& n : graph.nodes()) {
        ids.push_back(n.id);
    }
    write_poses(dir / "poses.txt", ids, res.poses);
    std::string trace;
    for (double c : res.chi2_trace) {
        trace += format_double(c) + "\n";
    }
    write_text((dir / "chi2.txt").string(), trace);
    if (!frames.empty()) {
        write_xyz(dir / "cloud.xyz", fuse_clouds(frames, res.poses));
    }
    std::cerr << "loop-close: chi2 " << res.initial_chi2() << " -> " << res.final_chi2() << " in "
              << res.iterations << " iterations\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mask-aware probabilistic registration of segmented depth images"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::vector<std::string> images;
    std::string samples_csv;
    std::string gt;
    std::string graph;

    auto* synth = app.add_subcommand("synth", "render a synthetic tabletop sequence");
    add_common(synth, flags, "output directory for frame_NNN.mrd and ground_truth.csv");

    auto* reg = app.add_subcommand("register", "estimate the transform posterior between two images");
    add_common(reg, flags, "posterior report (JSON); stdout when omitted");
    reg->add_option("images", images, "image A and image B (MRD1)");
    reg->add_option("--samples-csv", samples_csv, "write every surviving weighted sample");

    auto* icp_cmd = app.add_subcommand("icp", "point-to-point ICP baseline between two images");
    add_common(icp_cmd, flags, "ICP report (JSON); stdout when omitted");
    icp_cmd->add_option("images", images, "image A and image B (MRD1)");

    auto* eval = app.add_subcommand("eval", "per-pair errors of both backends against ground truth");
    add_common(eval, flags, "output directory for errors.csv and summary.csv");
    eval->add_option("images", images, "frame sequence (MRD1)");
    eval->add_option("--gt", gt, "ground-truth CSV");

    auto* loop = app.add_subcommand("loop-close", "optimize a pose graph and fuse the clouds");
    add_common(loop, flags, "output directory for graph.txt, poses.txt, chi2.txt and cloud.xyz");
    loop->add_option("images", images, "frame sequence (MRD1)");
    loop->add_option("--graph", graph, "pose graph file; built by registration when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (synth->parsed()) return run_synth(flags);
        if (reg->parsed()) return run_register(flags, images, samples_csv);
        if (icp_cmd->parsed()) return run_icp(flags, images);
        if (eval->parsed()) return run_eval(flags, images, gt);
        if (loop->parsed()) return run_loop_close(flags, images, graph);
    } catch (const NoPosteriorError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRejected;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const IoError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitInvalid;
}
