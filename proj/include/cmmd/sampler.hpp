#pragma once

#include <cstdint>
#include <vector>

#include "cmmd/denoiser.hpp"
#include "cmmd/rng.hpp"
#include "cmmd/tensor.hpp"

namespace cmmd {

enum class Direction { kJoint, kVideoToAudio, kAudioToVideo };

const char* direction_name(Direction d);
Direction direction_from_name(const std::string& name);

struct SamplerConfig {
    std::size_t ddim_steps = 200;
    double lambda = 0.0;
    // When set, the effective guidance weight per step is
    // lambda * (1 - abar_n); the guidance term scales with the noise level.
    bool lambda_scaled = false;
    Direction direction = Direction::kJoint;
    std::uint64_t seed = 0;
};

// Strictly decreasing step grid from N to 0 with both endpoints included.
std::vector<std::size_t> ddim_step_indices(std::size_t total_steps, std::size_t ddim_steps);

// Deterministic DDIM update from x0/eps estimates.
Tensor ddim_step_from_estimates(const Tensor& x0_hat, const Tensor& eps_hat,
                                double abar_prev);

// x_prev = sqrt(abar_prev) x0_hat + sqrt(1 - abar_prev) eps_hat with both
// estimates recovered from the v prediction. Requires abar_n < abar_prev <= 1.
Tensor ddim_step(const Tensor& x_n, const Tensor& v_pred, double abar_n, double abar_prev);

// Gradient of || condition_x0 - x0_hat_condition ||^2 with respect to the
// generated modality's noisy input, where x0_hat_condition is recovered from
// the model's v prediction for the conditioning modality.
Tensor guidance_gradient(const Denoiser& model, const Tensor& video_n,
                         const Tensor& audio_n, std::size_t n, const Tensor& condition_x0,
                         Direction direction);

// Unconditional joint generation from the standard normal prior.
ModalPair sample_joint(const Denoiser& model, const SamplerConfig& config, Rng& rng);

// Conditional generation. Both per-run noises are drawn once at the start:
// the conditioning modality follows the fixed trajectory
// diffuse(condition_x0, eps_cond, abar_n), and the generated modality is
// re-noised on its own fixed ray each step,
//   x_prev = sqrt(abar_prev) x0_hat + sqrt(1 - abar_prev) eps_target.
// With lambda = 0 this is the replacement method and never queries model
// gradients; with lambda > 0 the unguided x0 estimate is corrected by
// lambda_eff * sqrt(abar_n) * guidance_gradient.
Tensor sample_conditional(const Denoiser& model, const Tensor& condition_x0,
                          const SamplerConfig& config, Rng& rng);

} // namespace cmmd
