#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmmd/denoiser.hpp"
#include "cmmd/tensor.hpp"

namespace cmmd {

GaussianWorld identity_world(std::size_t dim);

// Block covariance [[I, rho*I], [rho*I, I]] over (video, audio) halves of
// equal size, with per-block constant means.
GaussianWorld block_world(std::size_t dv, std::size_t da, double rho,
                          double mu_video = 0.0, double mu_audio = 0.0);

// i.i.d. draws from N(mu, sigma), split into modality tensors. The first
// D_v coordinates fill the video tensor row-major, the rest the audio.
std::vector<ModalPair> gaussian_pairs(const GaussianWorld& world, std::size_t count,
                                      const std::vector<std::size_t>& video_shape,
                                      const std::vector<std::size_t>& audio_shape,
                                      std::uint64_t seed);

// Flash-and-click dataset: full-frame flashes at k random frames with
// broadband audio columns at the corresponding timesteps. Temporal ratios
// follow the production shapes at toy width.
struct EventDatasetConfig {
    std::size_t num_items = 100;
    std::size_t frames = 18, video_channels = 2, height = 8, width = 8;
    std::size_t steps = 112, audio_channels = 8;
    std::size_t events_per_clip = 1;
    double amplitude = 3.0;
    double noise_level = 0.1;
    std::uint64_t seed = 0;
};

struct EventItem {
    ModalPair pair;
    std::vector<std::size_t> event_frames;
};

std::vector<EventItem> event_pairs(const EventDatasetConfig& config);

// Audio steps owned by a video frame: the preimage of the frame under the
// nearest-neighbor time mapping used by fusion.
std::vector<std::size_t> event_audio_steps(std::size_t frame, std::size_t frames,
                                           std::size_t steps);

// Detects video events (frame mean above a robust background threshold) and
// audio events (column mean, same rule, mapped to frames), then matches them
// greedily one-to-one within the tolerance. Returns matched / detected video
// events; empty when no video events are detected.
std::optional<double> alignment_score(const Tensor& video, const Tensor& audio,
                                      double tolerance_frames);

// Dataset directory: one tensor file per modality per item plus a text
// index with event labels and per-item stream ids.
struct StoredDataset {
    std::vector<ModalPair> items;
    std::vector<std::vector<std::size_t>> event_frames; // empty for gaussian
    std::string kind; // "event" or "gaussian"
};

void save_dataset(const std::string& dir, const std::vector<EventItem>& items);
void save_dataset(const std::string& dir, const std::vector<ModalPair>& items);
StoredDataset load_dataset(const std::string& dir);

} // namespace cmmd
