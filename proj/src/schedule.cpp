#include "cmmd/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cmmd {

NoiseSchedule::NoiseSchedule(std::size_t steps, std::vector<double> alpha_bar)
    : steps_(steps), alpha_bar_(std::move(alpha_bar)) {
    if (steps_ < 1) {
        throw std::invalid_argument("NoiseSchedule: need at least one step");
    }
    if (alpha_bar_.size() != steps_ + 1) {
        throw std::invalid_argument("NoiseSchedule: expected N+1 coefficients");
    }
    if (alpha_bar_[0] != 1.0) {
        throw std::invalid_argument("NoiseSchedule: abar_0 must be exactly 1");
    }
    for (std::size_t n = 1; n <= steps_; ++n) {
        if (!(alpha_bar_[n] > 0.0 && alpha_bar_[n] <= 1.0)) {
            throw std::invalid_argument("NoiseSchedule: abar_n must lie in (0, 1]");
        }
        if (!(alpha_bar_[n] < alpha_bar_[n - 1])) {
            throw std::invalid_argument("NoiseSchedule: abar must be strictly decreasing");
        }
    }
}

double NoiseSchedule::alpha_bar(std::size_t n) const {
    if (n > steps_) {
        throw std::invalid_argument("NoiseSchedule: step out of range");
    }
    return alpha_bar_[n];
}

NoiseSchedule cosine_schedule(std::size_t steps, double offset) {
    if (steps < 1) {
        throw std::invalid_argument("cosine_schedule: steps must be >= 1");
    }
    if (!(offset > 0.0)) {
        throw std::invalid_argument("cosine_schedule: offset must be > 0");
    }
    auto f = [&](double n) {
        double arg = (n / static_cast<double>(steps) + offset) / (1.0 + offset) *
                     std::numbers::pi / 2.0;
        double c = std::cos(arg);
        return c * c;
    };
    double f0 = f(0.0);
    std::vector<double> abar(steps + 1);
    abar[0] = 1.0;
    for (std::size_t n = 1; n <= steps; ++n) {
        abar[n] = f(static_cast<double>(n)) / f0;
    }
    return NoiseSchedule(steps, std::move(abar));
}

namespace {

void require_open_unit(double abar, const char* what) {
    if (!(abar > 0.0 && abar <= 1.0)) {
        throw std::invalid_argument(std::string(what) + ": abar must lie in (0, 1]");
    }
}

void require_closed_unit(double abar, const char* what) {
    if (!(abar >= 0.0 && abar <= 1.0)) {
        throw std::invalid_argument(std::string(what) + ": abar must lie in [0, 1]");
    }
}

} // namespace

Tensor velocity(const Tensor& x0, const Tensor& eps, double abar) {
    require_open_unit(abar, "velocity");
    return scale_add(eps, std::sqrt(abar), x0, -std::sqrt(1.0 - abar));
}

Tensor x0_from_v(const Tensor& x_n, const Tensor& v, double abar) {
    require_closed_unit(abar, "x0_from_v");
    return scale_add(x_n, std::sqrt(abar), v, -std::sqrt(1.0 - abar));
}

Tensor eps_from_v(const Tensor& x_n, const Tensor& v, double abar) {
    require_closed_unit(abar, "eps_from_v");
    return scale_add(v, std::sqrt(abar), x_n, std::sqrt(1.0 - abar));
}

} // namespace cmmd
