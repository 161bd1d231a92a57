#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "maskreg/depth_image.hpp"
#include "maskreg/geometry.hpp"
#include "maskreg/priors.hpp"
#include "maskreg/sensor.hpp"

namespace maskreg {

struct WeightedSample {
    RigidTransform transform;
    double log_weight = 0.0;  // unnormalized
};

/// Importance-sampling approximation of p(T | data): surviving samples,
/// their normalized weights and the derived moments.
struct TransformPosterior {
    std::vector<WeightedSample> samples;
    std::vector<double> weights;  // normalized, parallel to samples
    RigidTransform mean;
    Matrix6 covariance = Matrix6::Zero();  // tangent space at the mean
    double effective_sample_size = 0.0;
    std::size_t rejected_count = 0;
    std::size_t evaluated_count = 0;
    double wall_seconds = 0.0;  // not part of the deterministic result
};

struct RegistrationConfig {
    std::size_t n_samples = 10000;
    std::size_t n_points = 200;  // per cloud, per direction
    std::uint64_t seed = 0;
    unsigned threads = 1;
    PointLikelihoodConfig likelihood;

    void validate() const;
};

/// Every sample was rejected; no posterior can be formed.
class NoPosteriorError : public std::runtime_error {
public:
    NoPosteriorError(std::size_t rejected, std::size_t evaluated);
    std::size_t rejected_count() const { return rejected_; }
    std::size_t evaluated_count() const { return evaluated_; }

private:
    std::size_t rejected_;
    std::size_t evaluated_;
};

/// Draws T from the prior and weights it by
///   p(P_B | M_A, T) p(P_A | M_B, T);
/// a REJECT in either direction discards the sample. T maps frame A points
/// to frame B. Results are bitwise identical for any thread count.
///
/// Throws DomainError if an image has no OBJECT pixel or the config is
/// invalid, NoPosteriorError if nothing survives.
TransformPosterior register_pair(const DepthImage& img_a, const DepthImage& img_b, const PriorSpec& prior,
                                 const RegistrationConfig& config);

/// exp(log_weight) normalized with log-sum-exp.
std::vector<double> normalized_weights(std::span<const WeightedSample> samples);

/// Weighted translation mean and weighted chordal rotation mean.
/// Throws DomainError on an empty set, NumericalError when the weighted
/// rotation sum has no unique projection onto SO(3).
RigidTransform posterior_mean(std::span<const WeightedSample> samples, std::span<const double> weights);
RigidTransform posterior_mean(std::span<const WeightedSample> samples);

/// sum_l w_l d_l d_l^T with d_l = log6(mean^-1 * T_l).
Matrix6 posterior_covariance(std::span<const WeightedSample> samples, std::span<const double> weights,
                             const RigidTransform& mean);
Matrix6 posterior_covariance(std::span<const WeightedSample> samples, const RigidTransform& mean);

/// 1 / sum w^2 for normalized weights.
double effective_sample_size(std::span<const double> weights);

}  // namespace maskreg
