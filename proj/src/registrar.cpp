#include "maskreg/registrar.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <thread>

#include <Eigen/SVD>

#include "maskreg/random.hpp"

namespace maskreg {

namespace {

// Stream tags under the master seed.
constexpr std::uint64_t kCloudStreamA = 0xA;
constexpr std::uint64_t kCloudStreamB = 0xB;
constexpr std::uint64_t kSamplerStream = 0x5A;

std::vector<PreparedPoint> prepared_subsample(const DepthImage& img, std::size_t n_points, std::uint64_t seed) {
    std::vector<RayPoint> cloud = subsample_object(img, n_points, seed);
    // Random evaluation order lets bad hypotheses hit a rejecting point early.
    Rng rng(seed ^ 0x5eedULL);
    std::shuffle(cloud.begin(), cloud.end(), rng);
    return prepare_cloud(cloud);
}

// log p(P_B | M_A, T) + log p(P_A | M_B, T), alternating the two directions
// point by point so a rejection in either one ends the evaluation early.
std::optional<double> joint_log_likelihood(const MaskLikelihood& mask_a, std::span<const PreparedPoint> cloud_b,
                                           const MaskLikelihood& mask_b, std::span<const PreparedPoint> cloud_a,
                                           const RigidTransform& T) {
    const RigidTransform T_inv = T.inverse();
    double sum_b = 0.0;
    double sum_a = 0.0;
    const std::size_t n = std::max(cloud_a.size(), cloud_b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i < cloud_b.size()) {
            const auto lp = mask_a.point(cloud_b[i], T);
            if (!lp) {
                return std::nullopt;
            }
            sum_b += *lp;
        }
        if (i < cloud_a.size()) {
            const auto lp = mask_b.point(cloud_a[i], T_inv);
            if (!lp) {
                return std::nullopt;
            }
            sum_a += *lp;
        }
    }
    return sum_b + sum_a;
}

}  // namespace

void RegistrationConfig::validate() const {
    if (n_samples < 1) {
        throw DomainError("registration: n_samples must be >= 1");
    }
    if (n_points < 1) {
        throw DomainError("registration: n_points must be >= 1");
    }
    if (threads < 1) {
        throw DomainError("registration: threads must be >= 1");
    }
    likelihood.validate();
}

NoPosteriorError::NoPosteriorError(std::size_t rejected, std::size_t evaluated)
    : std::runtime_error("registration: all " + std::to_string(rejected) + " of " + std::to_string(evaluated) +
                         " samples were rejected"),
      rejected_(rejected),
      evaluated_(evaluated) {}

TransformPosterior register_pair(const DepthImage& img_a, const DepthImage& img_b, const PriorSpec& prior,
                                 const RegistrationConfig& config) {
    const auto t_start = std::chrono::steady_clock::now();
    config.validate();
    if (img_a.object_count() == 0 || img_b.object_count() == 0) {
        throw DomainError("registration: both images need at least one OBJECT pixel");
    }

    const BoundPrior bound(prior, img_a.object_points(), img_b.object_points());
    const auto cloud_a = prepared_subsample(img_a, config.n_points, Rng::substream(config.seed, kCloudStreamA)());
    const auto cloud_b = prepared_subsample(img_b, config.n_points, Rng::substream(config.seed, kCloudStreamB)());
    const MaskLikelihood mask_a(img_a, config.likelihood);
    const MaskLikelihood mask_b(img_b, config.likelihood);
    const std::uint64_t sampler_seed = Rng::substream(config.seed, kSamplerStream)();

    const std::size_t n = config.n_samples;
    std::vector<std::optional<WeightedSample>> slots(n);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t l = begin; l < end; ++l) {
            Rng rng = Rng::substream(sampler_seed, l);
            const RigidTransform T = bound.sample(rng);
            if (const auto ll = joint_log_likelihood(mask_a, cloud_b, mask_b, cloud_a, T)) {
                slots[l] = WeightedSample{T, *ll};
            }
        }
    };

    const std::size_t workers = std::min<std::size_t>(config.threads, n);
    if (workers <= 1) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) {
                pool.emplace_back(work, begin, end);
            }
        }
    }

    TransformPosterior post;
    post.evaluated_count = n;
    for (auto& s : slots) {
        if (s) {
            post.samples.push_back(*s);
        }
    }
    post.rejected_count = n - post.samples.size();
    if (post.samples.empty()) {
        throw NoPosteriorError(post.rejected_count, post.evaluated_count);
    }
    post.weights = normalized_weights(post.samples);
    post.mean = posterior_mean(post.samples, post.weights);
    post.covariance = posterior_covariance(post.samples, post.weights, post.mean);
    post.effective_sample_size = effective_sample_size(post.weights);
    post.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return post;
}

std::vector<double> normalized_weights(std::span<const WeightedSample> samples) {
    if (samples.empty()) {
        return {};
    }
    double max_lw = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        max_lw = std::max(max_lw, s.log_weight);
    }
    std::vector<double> w(samples.size());
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        w[i] = std::exp(samples[i].log_weight - max_lw);
        total += w[i];
    }
    for (double& x : w) {
        x /= total;
    }
    return w;
}

RigidTransform posterior_mean(std::span<const WeightedSample> samples, std::span<const double> weights) {
    if (samples.empty() || samples.size() != weights.size()) {
        throw DomainError("posterior_mean: need a non-empty sample set with matching weights");
    }
    Matrix3 rot_sum = Matrix3::Zero();
    Vector3 t_mean = Vector3::Zero();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        rot_sum += weights[i] * samples[i].transform.rotation();
        t_mean += weights[i] * samples[i].transform.translation();
    }
    // Orthogonal polar factor, restricted to SO(3).
    Eigen::JacobiSVD<Matrix3> svd(rot_sum, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector3 s = svd.singularValues();
    const double sign = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    if (!(s[1] + sign * s[2] > 1e-12 * std::max(s[0], 1e-300))) {
        throw NumericalError("posterior_mean: weighted rotation sum is rank deficient");
    }
    const Matrix3 fix = Vector3(1.0, 1.0, sign).asDiagonal();
    const Matrix3 R = svd.matrixU() * fix * svd.matrixV().transpose();
    return {R, t_mean};
}

RigidTransform posterior_mean(std::span<const WeightedSample> samples) {
    const auto w = normalized_weights(samples);
    return posterior_mean(samples, w);
}

Matrix6 posterior_covariance(std::span<const WeightedSample> samples, std::span<const double> weights,
                             const RigidTransform& mean) {
    if (samples.size() != weights.size()) {
        throw DomainError("posterior_covariance: weights do not match samples");
    }
    const RigidTransform mean_inv = mean.inverse();
    Matrix6 cov = Matrix6::Zero();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (weights[i] == 0.0) {
            continue;
        }
        const Vector6 d = log6(mean_inv * samples[i].transform);
        cov.noalias() += weights[i] * d * d.transpose();
    }
    return 0.5 * (cov + cov.transpose());
}

Matrix6 posterior_covariance(std::span<const WeightedSample> samples, const RigidTransform& mean) {
    const auto w = normalized_weights(samples);
    return posterior_covariance(samples, w, mean);
}

double effective_sample_size(std::span<const double> weights) {
    double sq = 0.0;
    for (double w : weights) {
        sq += w * w;
    }
    return sq > 0.0 ? 1.0 / sq : 0.0;
}

}  // namespace maskreg
