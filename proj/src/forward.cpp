#include "cmmd/forward.hpp"

#include <cmath>
#include <stdexcept>

namespace cmmd {

Tensor diffuse(const Tensor& x0, const Tensor& eps, double abar) {
    if (!(abar > 0.0 && abar <= 1.0)) {
        throw std::invalid_argument("diffuse: abar must lie in (0, 1]");
    }
    return scale_add(x0, std::sqrt(abar), eps, std::sqrt(1.0 - abar));
}

std::vector<Tensor> conditioning_trajectory(const Tensor& x0, const Tensor& eps,
                                            const NoiseSchedule& schedule) {
    require_same_shape(x0, eps, "conditioning_trajectory");
    std::vector<Tensor> out;
    out.reserve(schedule.steps());
    for (std::size_t n = 1; n <= schedule.steps(); ++n) {
        out.push_back(diffuse(x0, eps, schedule.alpha_bar(n)));
    }
    return out;
}

Tensor normal_like(const Tensor& shape_source, Rng& rng) {
    Tensor out(shape_source.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = rng.normal();
    }
    return out;
}

} // namespace cmmd
