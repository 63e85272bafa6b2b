#pragma once

#include <vector>

#include "cmmd/rng.hpp"
#include "cmmd/schedule.hpp"
#include "cmmd/tensor.hpp"

namespace cmmd {

// x_n = sqrt(abar) * x0 + sqrt(1 - abar) * eps
Tensor diffuse(const Tensor& x0, const Tensor& eps, double abar);

// A noised pair at a single step of the schedule.
struct NoisyPair {
    Tensor video;
    Tensor audio;
    std::size_t step = 0;
};

// Fixed-noise trajectory: element n-1 is diffuse(x0, eps, abar_n) for
// n = 1..N with eps drawn once and held for the whole run.
std::vector<Tensor> conditioning_trajectory(const Tensor& x0, const Tensor& eps,
                                            const NoiseSchedule& schedule);

Tensor normal_like(const Tensor& shape_source, Rng& rng);

} // namespace cmmd
