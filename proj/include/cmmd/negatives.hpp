#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cmmd/rng.hpp"
#include "cmmd/tensor.hpp"

namespace cmmd {

enum class AugmentationKind { kTemporalShift, kSegmentSwap, kFullSwap };

enum class SwapSide { kLeft, kRight };

enum class FillPolicy { kWrap };

struct NegativeProvenance {
    AugmentationKind kind = AugmentationKind::kTemporalShift;
    long shift = 0;                   // temporal-shift amount (native units)
    std::size_t split = 0;            // segment-swap split point
    SwapSide side = SwapSide::kLeft;  // segment-swap side taken from donor
    std::optional<std::size_t> donor; // dataset index of the donor item
};

// Mismatched single-modality samples plus the augmentation parameters that
// produced each one. Given the inputs and a seed the batch is fully
// reproducible.
struct NegativeBatch {
    std::vector<Tensor> items;
    std::vector<NegativeProvenance> provenance;
};

// Content moved by `shift` along axis 0; vacated region wraps around:
// out[t] = in[(t - shift) mod L].
Tensor negative_temporal_shift(const Tensor& x, long shift,
                               FillPolicy fill = FillPolicy::kWrap);

// side = kLeft:  donor[0:split] ++ x[split:]
// side = kRight: x[0:split] ++ donor[split:]
Tensor negative_segment_swap(const Tensor& x, const Tensor& donor, std::size_t split,
                             SwapSide side);

// The donor itself becomes the negative; only provenance marks it as one.
Tensor negative_full_swap(const Tensor& positive, const Tensor& donor);

struct NegativeConfig {
    std::size_t count_per_modality = 2;
    long min_shift_frames = 2; // in video frames; audio shifts are scaled
    long max_shift_frames = 4;
};

// Builds (audio negatives, video negatives) for the positive item at
// `positive_index`. Each negative uses one of the three augmentations chosen
// uniformly; donors are never the positive item. With fewer than two items
// the donor-based kinds are unavailable and everything falls back to
// temporal shifts (logged).
std::pair<NegativeBatch, NegativeBatch> sample_negatives(
    const std::vector<ModalPair>& dataset, std::size_t positive_index,
    const NegativeConfig& config, Rng& rng);

} // namespace cmmd
