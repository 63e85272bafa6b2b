#include "cmmd/trainer.hpp"

#include <cmath>
#include <ostream>

#include "cmmd/forward.hpp"
#include "cmmd/manifest.hpp"

namespace cmmd {

double lr_at(std::size_t step, const LrSchedule& schedule) {
    double lr = schedule.initial *
                std::pow(schedule.decay, static_cast<double>(step / schedule.interval));
    return std::max(schedule.floor, lr);
}

double joint_diffusion_loss(const Denoiser& model, const ModalPair& pair, std::size_t n,
                            const Tensor& eps_video, const Tensor& eps_audio,
                            const NoiseSchedule& schedule) {
    double abar = schedule.alpha_bar(n);
    Tensor video_n = diffuse(pair.video, eps_video, abar);
    Tensor audio_n = diffuse(pair.audio, eps_audio, abar);
    Tensor target_video = velocity(pair.video, eps_video, abar);
    Tensor target_audio = velocity(pair.audio, eps_audio, abar);
    DenoiserOutput out = model.predict(video_n, audio_n, n);
    return mean_squared_error(out.v_video, target_video) +
           mean_squared_error(out.v_audio, target_audio);
}

ContrastiveParts contrastive_loss(const Denoiser& model, const ModalPair& pair,
                                  const NegativeBatch& audio_negatives,
                                  const NegativeBatch& video_negatives, std::size_t n,
                                  const NoiseSet& noises, const NoiseSchedule& schedule,
                                  double eta) {
    if (eta != 0.0 && audio_negatives.items.empty() && video_negatives.items.empty()) {
        throw std::invalid_argument("contrastive_loss: eta > 0 requires negatives");
    }
    if (audio_negatives.items.size() != noises.eps_neg_audio.size() ||
        video_negatives.items.size() != noises.eps_neg_video.size()) {
        throw std::invalid_argument("contrastive_loss: one noise per negative required");
    }

    ContrastiveParts parts;
    parts.positive = joint_diffusion_loss(model, pair, n, noises.eps_video,
                                          noises.eps_audio, schedule);
    if (!audio_negatives.items.empty()) {
        double sum = 0.0;
        for (std::size_t i = 0; i < audio_negatives.items.size(); ++i) {
            ModalPair mismatched{pair.video, audio_negatives.items[i]};
            sum += joint_diffusion_loss(model, mismatched, n, noises.eps_video,
                                        noises.eps_neg_audio[i], schedule);
        }
        parts.negative_audio_mean = sum / static_cast<double>(audio_negatives.items.size());
    }
    if (!video_negatives.items.empty()) {
        double sum = 0.0;
        for (std::size_t i = 0; i < video_negatives.items.size(); ++i) {
            ModalPair mismatched{video_negatives.items[i], pair.audio};
            sum += joint_diffusion_loss(model, mismatched, n, noises.eps_neg_video[i],
                                        noises.eps_audio, schedule);
        }
        parts.negative_video_mean = sum / static_cast<double>(video_negatives.items.size());
    }
    parts.total = parts.positive - eta * parts.negative_audio_mean -
                  eta * parts.negative_video_mean;
    return parts;
}

void write_metrics_header(std::ostream& out) {
    out << "step, loss, loss_neg_a, loss_neg_v, n, lr\n";
}

void write_metrics_record(std::ostream& out, const StepRecord& record) {
    out << record.step << ", " << format_double(record.loss) << ", "
        << format_double(record.loss_neg_a) << ", " << format_double(record.loss_neg_v)
        << ", " << record.n << ", " << format_double(record.lr) << "\n";
}

Trainer::Trainer(ToyNet& net, std::vector<ModalPair> dataset, TrainConfig config)
    : net_(net), dataset_(std::move(dataset)), config_(config), rng_(config.seed) {
    if (dataset_.empty()) {
        throw std::invalid_argument("Trainer: empty dataset");
    }
    if (config_.batch_size < 1 || config_.total_steps < 1) {
        throw std::invalid_argument("Trainer: batch size and total steps must be >= 1");
    }
    if (config_.eta < 0.0 || config_.lr.floor > config_.lr.initial) {
        throw std::invalid_argument("Trainer: eta must be >= 0 and lr floor <= initial");
    }
    for (const auto& pair : dataset_) {
        if (pair.video.shape() != net_.video_shape() ||
            pair.audio.shape() != net_.audio_shape()) {
            throw std::invalid_argument("Trainer: dataset shapes do not match the model");
        }
    }
    grads_.assign(net_.parameter_count(), 0.0);
    adam_m_.assign(net_.parameter_count(), 0.0);
    adam_v_.assign(net_.parameter_count(), 0.0);
}

StepRecord Trainer::step() {
    const NoiseSchedule& schedule = net_.schedule();
    std::size_t total_n = schedule.steps();
    bool contrastive_active =
        config_.eta != 0.0 &&
        step_index_ >= static_cast<std::size_t>(config_.enable_contrastive_at *
                                                static_cast<double>(config_.total_steps));

    StepRecord record;
    record.step = step_index_;
    record.lr = lr_at(step_index_, config_.lr);
    record.contrastive_active = contrastive_active;

    std::fill(grads_.begin(), grads_.end(), 0.0);
    double inv_batch = 1.0 / static_cast<double>(config_.batch_size);
    std::size_t negs = config_.negatives.count_per_modality;

    for (std::size_t b = 0; b < config_.batch_size; ++b) {
        // Algorithm order: draw sample, negatives, n, then the four noise
        // groups. Every draw happens regardless of contrastive_active.
        std::size_t idx = rng_.index(dataset_.size());
        const ModalPair& pair = dataset_[idx];
        auto [audio_negs, video_negs] =
            sample_negatives(dataset_, idx, config_.negatives, rng_);
        for (const auto& prov : audio_negs.provenance) {
            if (prov.donor && *prov.donor == idx) {
                record.provenance_ok = false;
            }
        }
        for (const auto& prov : video_negs.provenance) {
            if (prov.donor && *prov.donor == idx) {
                record.provenance_ok = false;
            }
        }

        std::size_t n = 1 + rng_.index(total_n);
        record.n = n;
        double abar = schedule.alpha_bar(n);

        Tensor eps_a = normal_like(pair.audio, rng_);
        std::vector<Tensor> eps_neg_a;
        for (std::size_t i = 0; i < negs; ++i) {
            eps_neg_a.push_back(normal_like(pair.audio, rng_));
        }
        Tensor eps_v = normal_like(pair.video, rng_);
        std::vector<Tensor> eps_neg_v;
        for (std::size_t i = 0; i < negs; ++i) {
            eps_neg_v.push_back(normal_like(pair.video, rng_));
        }

        Tensor video_n = diffuse(pair.video, eps_v, abar);
        Tensor audio_n = diffuse(pair.audio, eps_a, abar);
        Tensor target_v = velocity(pair.video, eps_v, abar);
        Tensor target_a = velocity(pair.audio, eps_a, abar);

        ToyNet::Workspace ws;
        DenoiserOutput out = net_.forward(video_n, audio_n, n, &ws);
        double loss_pos = mean_squared_error(out.v_video, target_v) +
                          mean_squared_error(out.v_audio, target_a);
        record.loss += loss_pos * inv_batch;

        Tensor cot_v = scale_add(out.v_video, 2.0 / static_cast<double>(target_v.size()),
                                 target_v, -2.0 / static_cast<double>(target_v.size()));
        Tensor cot_a = scale_add(out.v_audio, 2.0 / static_cast<double>(target_a.size()),
                                 target_a, -2.0 / static_cast<double>(target_a.size()));
        double positive_weight = inv_batch;

        if (contrastive_active) {
            double neg_weight = -config_.eta * inv_batch / static_cast<double>(negs);
            double cap = config_.negative_clamp_factor * loss_pos;

            for (std::size_t i = 0; i < negs; ++i) {
                Tensor neg_audio_n = diffuse(audio_negs.items[i], eps_neg_a[i], abar);
                Tensor neg_target_a = velocity(audio_negs.items[i], eps_neg_a[i], abar);
                ToyNet::Workspace nws;
                DenoiserOutput nout = net_.forward(video_n, neg_audio_n, n, &nws);
                double loss_neg = mean_squared_error(nout.v_video, target_v) +
                                  mean_squared_error(nout.v_audio, neg_target_a);
                if (config_.clamp_negatives && loss_neg > cap) {
                    // Clamped term contributes c * L_pos instead; route its
                    // gradient through the positive pass.
                    record.clamped = true;
                    record.loss_neg_a += cap * inv_batch / static_cast<double>(negs);
                    positive_weight += config_.negative_clamp_factor * neg_weight;
                    continue;
                }
                record.loss_neg_a += loss_neg * inv_batch / static_cast<double>(negs);
                Tensor ncot_v =
                    scale_add(nout.v_video, 2.0 / static_cast<double>(target_v.size()),
                              target_v, -2.0 / static_cast<double>(target_v.size()));
                Tensor ncot_a =
                    scale_add(nout.v_audio, 2.0 / static_cast<double>(neg_target_a.size()),
                              neg_target_a, -2.0 / static_cast<double>(neg_target_a.size()));
                net_.backward(nws, ncot_v, ncot_a, neg_weight, &grads_, nullptr, nullptr);
            }
            for (std::size_t i = 0; i < negs; ++i) {
                Tensor neg_video_n = diffuse(video_negs.items[i], eps_neg_v[i], abar);
                Tensor neg_target_v = velocity(video_negs.items[i], eps_neg_v[i], abar);
                ToyNet::Workspace nws;
                DenoiserOutput nout = net_.forward(neg_video_n, audio_n, n, &nws);
                double loss_neg = mean_squared_error(nout.v_video, neg_target_v) +
                                  mean_squared_error(nout.v_audio, target_a);
                if (config_.clamp_negatives && loss_neg > cap) {
                    record.clamped = true;
                    record.loss_neg_v += cap * inv_batch / static_cast<double>(negs);
                    positive_weight += config_.negative_clamp_factor * neg_weight;
                    continue;
                }
                record.loss_neg_v += loss_neg * inv_batch / static_cast<double>(negs);
                Tensor ncot_v =
                    scale_add(nout.v_video, 2.0 / static_cast<double>(neg_target_v.size()),
                              neg_target_v, -2.0 / static_cast<double>(neg_target_v.size()));
                Tensor ncot_a =
                    scale_add(nout.v_audio, 2.0 / static_cast<double>(target_a.size()),
                              target_a, -2.0 / static_cast<double>(target_a.size()));
                net_.backward(nws, ncot_v, ncot_a, neg_weight, &grads_, nullptr, nullptr);
            }
        }

        net_.backward(ws, cot_v, cot_a, positive_weight, &grads_, nullptr, nullptr);
    }

    double batch_total = record.loss - config_.eta * (record.loss_neg_a + record.loss_neg_v);
    if (!std::isfinite(batch_total)) {
        throw TrainingDiverged("training loss is not finite at step " +
                                   std::to_string(step_index_),
                               record);
    }

    // Adam update with bias correction.
    std::size_t t = step_index_ + 1;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double bias1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bias2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    std::vector<double>& params = net_.parameters();
    if (record.lr > 0.0) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            adam_m_[i] = beta1 * adam_m_[i] + (1.0 - beta1) * grads_[i];
            adam_v_[i] = beta2 * adam_v_[i] + (1.0 - beta2) * grads_[i] * grads_[i];
            double m_hat = adam_m_[i] / bias1;
            double v_hat = adam_v_[i] / bias2;
            params[i] -= record.lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }

    ++step_index_;
    return record;
}

} // namespace cmmd
