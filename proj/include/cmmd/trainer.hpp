#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "cmmd/checkpoint.hpp"
#include "cmmd/denoiser.hpp"
#include "cmmd/negatives.hpp"
#include "cmmd/rng.hpp"
#include "cmmd/tensor.hpp"
#include "cmmd/toynet.hpp"

namespace cmmd {

struct LrSchedule {
    double initial = 1e-4;
    double decay = 0.8;
    std::size_t interval = 80000;
    double floor = 2e-5;
};

// lr = max(floor, initial * decay^(step / interval))
double lr_at(std::size_t step, const LrSchedule& schedule);

struct TrainConfig {
    double eta = 5e-5;
    std::size_t batch_size = 8;
    std::size_t total_steps = 0;
    LrSchedule lr;
    NegativeConfig negatives;
    double enable_contrastive_at = 0.5; // fraction of total steps
    std::uint64_t seed = 0;
    ScheduleDescriptor schedule;
    // Escape hatch, off by default: cap each negative loss at
    // clamp_factor * positive loss (logged when it fires).
    bool clamp_negatives = false;
    double negative_clamp_factor = 10.0;
};

// Sum over modalities of the per-modality mean squared error between the
// model's prediction and the true velocities, with x_n formed from the
// given noises.
double joint_diffusion_loss(const Denoiser& model, const ModalPair& pair, std::size_t n,
                            const Tensor& eps_video, const Tensor& eps_audio,
                            const NoiseSchedule& schedule);

struct NoiseSet {
    Tensor eps_video;
    Tensor eps_audio;
    std::vector<Tensor> eps_neg_audio; // one per audio negative
    std::vector<Tensor> eps_neg_video; // one per video negative
};

struct ContrastiveParts {
    double positive = 0.0;
    double negative_audio_mean = 0.0;
    double negative_video_mean = 0.0;
    double total = 0.0;
    bool clamped = false;
};

// L = L_jdiff(pair) - eta * mean_i L_jdiff(video, audio_neg_i)
//                   - eta * mean_j L_jdiff(video_neg_j, audio)
// Negatives are diffused with their own noises from the NoiseSet.
ContrastiveParts contrastive_loss(const Denoiser& model, const ModalPair& pair,
                                  const NegativeBatch& audio_negatives,
                                  const NegativeBatch& video_negatives, std::size_t n,
                                  const NoiseSet& noises, const NoiseSchedule& schedule,
                                  double eta);

struct StepRecord {
    std::size_t step = 0;
    double loss = 0.0;       // positive joint loss, batch mean
    double loss_neg_a = 0.0; // mean negative-audio loss (0 while inactive)
    double loss_neg_v = 0.0;
    std::size_t n = 0; // diffusion step of the last batch element
    double lr = 0.0;
    bool contrastive_active = false;
    bool clamped = false;
    bool provenance_ok = true; // no negative used the positive as donor
};

struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& msg, StepRecord rec)
        : std::runtime_error(msg), record(rec) {}
    StepRecord record;
};

void write_metrics_header(std::ostream& out);
void write_metrics_record(std::ostream& out, const StepRecord& record);

// Single-writer training loop over a ToyNet with adaptive-moment updates
// (beta1 = 0.9, beta2 = 0.999, eps = 1e-8). All random draws happen whether
// or not the contrastive term is active, so an eta=0 run and an eta>0 run
// with the same seed see identical data, noises and step order.
class Trainer {
public:
    Trainer(ToyNet& net, std::vector<ModalPair> dataset, TrainConfig config);

    StepRecord step();
    std::size_t steps_done() const { return step_index_; }
    const TrainConfig& config() const { return config_; }

private:
    ToyNet& net_;
    std::vector<ModalPair> dataset_;
    TrainConfig config_;
    Rng rng_;
    std::size_t step_index_ = 0;
    std::vector<double> grads_;
    std::vector<double> adam_m_;
    std::vector<double> adam_v_;
};

} // namespace cmmd
