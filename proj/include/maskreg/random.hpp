#pragma once

#include <cstdint>
#include <limits>

namespace maskreg {

/// SplitMix64 bit generator (UniformRandomBitGenerator).
///
/// Cheap to construct, so every importance sample and every worker can own an
/// independent stream derived from (master seed, index); results then do not
/// depend on how work is split across threads.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    /// Stream `index` of the family rooted at `seed`.
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        Rng mixer(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
        const std::uint64_t a = mixer();
        const std::uint64_t b = mixer();
        return Rng(a ^ (b << 1) ^ index);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

}  // namespace maskreg
