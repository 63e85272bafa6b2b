#include "cmmd/toynet.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "cmmd/fusion.hpp"
#include "cmmd/rng.hpp"

namespace cmmd {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

} // namespace

ToyNet::ToyNet(ToyNetConfig config, NoiseSchedule schedule, std::uint64_t init_seed)
    : config_(std::move(config)), schedule_(std::move(schedule)), init_seed_(init_seed) {
    if (config_.video_shape.size() != 4 || config_.audio_shape.size() != 2) {
        throw std::invalid_argument("ToyNet: need rank-4 video and rank-2 audio shapes");
    }
    if (config_.time_features % 2 != 0 || config_.time_features == 0) {
        throw std::invalid_argument("ToyNet: time_features must be a positive even number");
    }
    video_size_ = shape_product(config_.video_shape);
    audio_size_ = shape_product(config_.audio_shape);
    std::size_t cv = config_.video_shape[1];
    std::size_t ca = config_.audio_shape[1];
    fused_video_size_ = video_size_ / cv * (cv + ca);
    fused_audio_size_ = audio_size_ / ca * (ca + cv);

    widths_.push_back(fused_video_size_ + fused_audio_size_ + config_.time_features);
    for (std::size_t h : config_.hidden) {
        if (h == 0) {
            throw std::invalid_argument("ToyNet: hidden widths must be positive");
        }
        widths_.push_back(h);
    }
    widths_.push_back(video_size_ + audio_size_);

    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        weight_offsets_.push_back(total);
        total += widths_[l + 1] * widths_[l];
        bias_offsets_.push_back(total);
        total += widths_[l + 1];
    }
    params_.assign(total, 0.0);

    Rng rng(init_seed);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        double scale = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
        double* w = &params_[weight_offsets_[l]];
        for (std::size_t i = 0; i < widths_[l + 1] * widths_[l]; ++i) {
            w[i] = scale * rng.normal();
        }
        // biases stay zero
    }
}

std::vector<double> ToyNet::time_feature_vector(std::size_t n) const {
    std::size_t half = config_.time_features / 2;
    double t = static_cast<double>(n) / static_cast<double>(schedule_.steps());
    std::vector<double> feat(config_.time_features);
    for (std::size_t i = 0; i < half; ++i) {
        double freq = std::pow(1000.0, half > 1 ? static_cast<double>(i) /
                                                      static_cast<double>(half - 1)
                                                : 0.0);
        feat[2 * i] = std::sin(freq * t);
        feat[2 * i + 1] = std::cos(freq * t);
    }
    return feat;
}

DenoiserOutput ToyNet::forward(const Tensor& video_n, const Tensor& audio_n, std::size_t n,
                               Workspace* ws) const {
    check_inputs(video_n, audio_n, n);

    FusedPair fused = easy_fuse(video_n, audio_n);
    std::vector<double> input;
    input.reserve(widths_[0]);
    input.insert(input.end(), fused.video.data().begin(), fused.video.data().end());
    input.insert(input.end(), fused.audio.data().begin(), fused.audio.data().end());
    std::vector<double> feat = time_feature_vector(n);
    input.insert(input.end(), feat.begin(), feat.end());

    std::size_t layers = widths_.size() - 1;
    std::vector<std::vector<double>> activations(layers);
    const std::vector<double>* current = &input;
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t in_dim = widths_[l], out_dim = widths_[l + 1];
        const double* w = &params_[weight_offsets_[l]];
        const double* b = &params_[bias_offsets_[l]];
        std::vector<double>& out = activations[l];
        out.assign(out_dim, 0.0);
        for (std::size_t i = 0; i < out_dim; ++i) {
            const double* row = &w[i * in_dim];
            double acc = b[i];
            for (std::size_t j = 0; j < in_dim; ++j) {
                acc += row[j] * (*current)[j];
            }
            out[i] = (l + 1 < layers) ? std::tanh(acc) : acc; // linear output layer
        }
        current = &out;
    }

    const std::vector<double>& final_out = activations.back();
    DenoiserOutput out;
    out.v_video = Tensor(config_.video_shape);
    out.v_audio = Tensor(config_.audio_shape);
    std::memcpy(out.v_video.data().data(), final_out.data(), video_size_ * sizeof(double));
    std::memcpy(out.v_audio.data().data(), final_out.data() + video_size_,
                audio_size_ * sizeof(double));

    if (ws != nullptr) {
        ws->input = std::move(input);
        ws->activations = std::move(activations);
    }
    return out;
}

DenoiserOutput ToyNet::predict(const Tensor& video_n, const Tensor& audio_n,
                               std::size_t n) const {
    return forward(video_n, audio_n, n, nullptr);
}

void ToyNet::backward(const Workspace& ws, const Tensor& cot_video, const Tensor& cot_audio,
                      double weight, std::vector<double>* grads, Tensor* d_video,
                      Tensor* d_audio) const {
    if (cot_video.shape() != config_.video_shape || cot_audio.shape() != config_.audio_shape) {
        throw std::invalid_argument("ToyNet::backward: cotangent shapes do not match");
    }
    if (grads != nullptr && grads->size() != params_.size()) {
        throw std::invalid_argument("ToyNet::backward: gradient buffer size mismatch");
    }

    std::size_t layers = widths_.size() - 1;
    std::vector<double> delta(widths_.back());
    std::memcpy(delta.data(), cot_video.data().data(), video_size_ * sizeof(double));
    std::memcpy(delta.data() + video_size_, cot_audio.data().data(),
                audio_size_ * sizeof(double));

    for (std::size_t li = layers; li-- > 0;) {
        std::size_t in_dim = widths_[li], out_dim = widths_[li + 1];
        const std::vector<double>& input =
            (li == 0) ? ws.input : ws.activations[li - 1];
        // tanh' through the stored activation: a = tanh(z) => dz = (1-a^2) da
        if (li + 1 < layers) {
            const std::vector<double>& act = ws.activations[li];
            for (std::size_t i = 0; i < out_dim; ++i) {
                delta[i] *= 1.0 - act[i] * act[i];
            }
        }
        const double* w = &params_[weight_offsets_[li]];
        if (grads != nullptr) {
            double* gw = &(*grads)[weight_offsets_[li]];
            double* gb = &(*grads)[bias_offsets_[li]];
            for (std::size_t i = 0; i < out_dim; ++i) {
                double di = weight * delta[i];
                double* grow = &gw[i * in_dim];
                for (std::size_t j = 0; j < in_dim; ++j) {
                    grow[j] += di * input[j];
                }
                gb[i] += di;
            }
        }
        if (li > 0 || d_video != nullptr || d_audio != nullptr) {
            std::vector<double> prev(in_dim, 0.0);
            for (std::size_t i = 0; i < out_dim; ++i) {
                const double* row = &w[i * in_dim];
                double di = delta[i];
                for (std::size_t j = 0; j < in_dim; ++j) {
                    prev[j] += row[j] * di;
                }
            }
            delta = std::move(prev);
        } else {
            delta.clear();
        }
    }

    if (d_video != nullptr || d_audio != nullptr) {
        // delta now holds the input cotangent: [fused video, fused audio, time features]
        std::size_t cv = config_.video_shape[1];
        std::size_t ca = config_.audio_shape[1];
        std::vector<std::size_t> fused_video_shape = config_.video_shape;
        fused_video_shape[1] = cv + ca;
        std::vector<std::size_t> fused_audio_shape = config_.audio_shape;
        fused_audio_shape[1] = ca + cv;

        Tensor cot_fused_video(fused_video_shape,
                               std::vector<double>(delta.begin(),
                                                   delta.begin() + fused_video_size_));
        Tensor cot_fused_audio(
            fused_audio_shape,
            std::vector<double>(delta.begin() + fused_video_size_,
                                delta.begin() + fused_video_size_ + fused_audio_size_));
        auto [dv, da] = easy_fuse_vjp(cot_fused_video, cot_fused_audio, config_.video_shape,
                                      config_.audio_shape);
        if (d_video != nullptr) {
            *d_video = std::move(dv);
        }
        if (d_audio != nullptr) {
            *d_audio = std::move(da);
        }
    }
}

std::pair<Tensor, Tensor> ToyNet::input_vjp(const Tensor& video_n, const Tensor& audio_n,
                                            std::size_t n, const Tensor& cot_video,
                                            const Tensor& cot_audio) const {
    Workspace ws;
    forward(video_n, audio_n, n, &ws);
    Tensor d_video, d_audio;
    backward(ws, cot_video, cot_audio, 1.0, nullptr, &d_video, &d_audio);
    return {std::move(d_video), std::move(d_audio)};
}

} // namespace cmmd
