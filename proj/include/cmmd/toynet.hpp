#pragma once

#include <cstdint>
#include <vector>

#include "cmmd/denoiser.hpp"
#include "cmmd/schedule.hpp"
#include "cmmd/tensor.hpp"

namespace cmmd {

struct ToyNetConfig {
    std::vector<std::size_t> video_shape; // (F, C_v, H, W)
    std::vector<std::size_t> audio_shape; // (T, C_a)
    std::vector<std::size_t> hidden;      // tanh hidden layer widths
    std::size_t time_features = 32;       // sinusoidal features of n/N
};

// Small dense network over easy-fused inputs. Both fused tensors are
// flattened, concatenated with the timestep features, pushed through tanh
// hidden layers and a linear output layer, and the output is split into the
// two modality-shaped velocity heads. Stand-in for a U-Net at desk scale;
// gradients are exact reverse mode and checked against finite differences.
class ToyNet : public Denoiser {
public:
    ToyNet(ToyNetConfig config, NoiseSchedule schedule, std::uint64_t init_seed);

    const std::vector<std::size_t>& video_shape() const override {
        return config_.video_shape;
    }
    const std::vector<std::size_t>& audio_shape() const override {
        return config_.audio_shape;
    }
    const NoiseSchedule& schedule() const override { return schedule_; }
    const ToyNetConfig& config() const { return config_; }

    DenoiserOutput predict(const Tensor& video_n, const Tensor& audio_n,
                           std::size_t n) const override;

    bool supports_input_gradient() const override { return true; }
    std::pair<Tensor, Tensor> input_vjp(const Tensor& video_n, const Tensor& audio_n,
                                        std::size_t n, const Tensor& cot_video,
                                        const Tensor& cot_audio) const override;

    // -- training surface -------------------------------------------------

    struct Workspace {
        std::vector<double> input;                    // fused input + time features
        std::vector<std::vector<double>> activations; // post-activation per layer
    };

    DenoiserOutput forward(const Tensor& video_n, const Tensor& audio_n, std::size_t n,
                           Workspace* ws) const;

    // Accumulates parameter gradients (scaled by `weight`) into `grads`,
    // which must have size parameter_count(). Optionally also returns input
    // cotangents. `ws` must come from a matching forward call.
    void backward(const Workspace& ws, const Tensor& cot_video, const Tensor& cot_audio,
                  double weight, std::vector<double>* grads, Tensor* d_video,
                  Tensor* d_audio) const;

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::uint64_t init_seed() const { return init_seed_; }

    // Layer widths including input and output: [D_in, hidden..., D_out].
    const std::vector<std::size_t>& layer_widths() const { return widths_; }

private:
    std::vector<double> time_feature_vector(std::size_t n) const;

    ToyNetConfig config_;
    NoiseSchedule schedule_;
    std::uint64_t init_seed_;
    std::size_t video_size_ = 0;
    std::size_t audio_size_ = 0;
    std::size_t fused_video_size_ = 0;
    std::size_t fused_audio_size_ = 0;
    std::vector<std::size_t> widths_;
    std::vector<std::size_t> weight_offsets_; // per layer: W (out x in), then b
    std::vector<std::size_t> bias_offsets_;
    std::vector<double> params_;
};

} // namespace cmmd
