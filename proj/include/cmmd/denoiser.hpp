#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cmmd/schedule.hpp"
#include "cmmd/tensor.hpp"

namespace cmmd {

struct DenoiserOutput {
    Tensor v_video;
    Tensor v_audio;
};

struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Joint v-prediction model: given noisy (video, audio) at step n it predicts
// the velocity target for both modalities.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual const std::vector<std::size_t>& video_shape() const = 0;
    virtual const std::vector<std::size_t>& audio_shape() const = 0;
    virtual const NoiseSchedule& schedule() const = 0;

    virtual DenoiserOutput predict(const Tensor& video_n, const Tensor& audio_n,
                                   std::size_t n) const = 0;

    virtual bool supports_input_gradient() const { return false; }

    // Vector-Jacobian product of the prediction with respect to both noisy
    // inputs: returns (d video_n, d audio_n) for the given output cotangents.
    virtual std::pair<Tensor, Tensor> input_vjp(const Tensor& video_n, const Tensor& audio_n,
                                                std::size_t n, const Tensor& cot_video,
                                                const Tensor& cot_audio) const;

protected:
    void check_inputs(const Tensor& video_n, const Tensor& audio_n, std::size_t n) const;
};

// Jointly Gaussian data model over the flattened concat(video, audio)
// vector. Used as the exact MMSE oracle in tests and samplers.
struct GaussianWorld {
    std::vector<double> mu;    // length D
    std::vector<double> sigma; // row-major D x D, symmetric positive definite

    std::size_t dim() const { return mu.size(); }
    // Throws if sigma is asymmetric beyond 1e-10 or not positive definite.
    void validate() const;
};

// E[x0 | x_n] = mu + sqrt(abar) * sigma * (abar*sigma + (1-abar)*I)^-1 * (x_n - sqrt(abar)*mu)
std::vector<double> analytic_posterior_mean(const GaussianWorld& world,
                                            std::span<const double> x_n, double abar);

// Closed-form optimal denoiser for a GaussianWorld: predicts the posterior
// mean of x0 and converts it to a velocity prediction. Linear in the inputs,
// so input gradients are exact.
class AnalyticGaussianDenoiser : public Denoiser {
public:
    AnalyticGaussianDenoiser(GaussianWorld world, std::vector<std::size_t> video_shape,
                             std::vector<std::size_t> audio_shape, NoiseSchedule schedule);

    const std::vector<std::size_t>& video_shape() const override { return video_shape_; }
    const std::vector<std::size_t>& audio_shape() const override { return audio_shape_; }
    const NoiseSchedule& schedule() const override { return schedule_; }
    const GaussianWorld& world() const { return world_; }

    DenoiserOutput predict(const Tensor& video_n, const Tensor& audio_n,
                           std::size_t n) const override;

    bool supports_input_gradient() const override { return true; }
    std::pair<Tensor, Tensor> input_vjp(const Tensor& video_n, const Tensor& audio_n,
                                        std::size_t n, const Tensor& cot_video,
                                        const Tensor& cot_audio) const override;

    // Posterior-mean gain at step n: x0_hat = mu + K_n (x - sqrt(abar_n) mu).
    std::span<const double> gain(std::size_t n) const;

private:
    GaussianWorld world_;
    std::vector<std::size_t> video_shape_;
    std::vector<std::size_t> audio_shape_;
    NoiseSchedule schedule_;
    std::size_t video_size_ = 0;
    std::size_t audio_size_ = 0;
    std::vector<std::vector<double>> gains_; // per n in [1, N], row-major D x D
};

} // namespace cmmd
