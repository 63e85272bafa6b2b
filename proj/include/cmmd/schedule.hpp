#pragma once

#include <cstddef>
#include <vector>

#include "cmmd/tensor.hpp"

namespace cmmd {

// Cumulative signal-retention coefficients abar_0..abar_N of a cosine
// schedule. abar_0 = 1 exactly; strictly decreasing; abar_n in (0, 1].
class NoiseSchedule {
public:
    NoiseSchedule(std::size_t steps, std::vector<double> alpha_bar);

    std::size_t steps() const { return steps_; }
    double alpha_bar(std::size_t n) const;
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }

private:
    std::size_t steps_;
    std::vector<double> alpha_bar_;
};

inline constexpr std::size_t kDefaultDiffusionSteps = 1000;
inline constexpr double kDefaultCosineOffset = 0.008;

// abar_n = f(n)/f(0), f(n) = cos^2(((n/N + s)/(1 + s)) * pi/2).
NoiseSchedule cosine_schedule(std::size_t steps = kDefaultDiffusionSteps,
                              double offset = kDefaultCosineOffset);

// v = sqrt(abar) * eps - sqrt(1 - abar) * x0
Tensor velocity(const Tensor& x0, const Tensor& eps, double abar);

// x0_hat = sqrt(abar) * x_n - sqrt(1 - abar) * v
Tensor x0_from_v(const Tensor& x_n, const Tensor& v, double abar);

// eps_hat = sqrt(abar) * v + sqrt(1 - abar) * x_n
Tensor eps_from_v(const Tensor& x_n, const Tensor& v, double abar);

} // namespace cmmd
