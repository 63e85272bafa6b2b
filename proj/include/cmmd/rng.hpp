#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cmmd {

// Seedable generator with explicit derived streams. Gaussian variates come
// from a Box-Muller transform so sequences are identical across platforms
// (std::normal_distribution is implementation-defined, mt19937_64 is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Independent stream derived from (seed, stream_id); used so that
    // per-item work can run in parallel yet stay reproducible.
    Rng stream(std::uint64_t stream_id) const;

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Uniform integer in [0, n). n must be >= 1.
    std::uint64_t index(std::uint64_t n);

    // Standard normal via Box-Muller (one spare cached).
    double normal();

    std::vector<double> normal_vector(std::size_t count);

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cmmd
