#include "cmmd/negatives.hpp"

#include <cmath>
#include <cstring>
#include <iostream>
#include <stdexcept>

namespace cmmd {

namespace {

std::size_t row_size(const Tensor& x) {
    std::size_t n = 1;
    for (std::size_t axis = 1; axis < x.rank(); ++axis) {
        n *= x.dim(axis);
    }
    return n;
}

} // namespace

Tensor negative_temporal_shift(const Tensor& x, long shift, FillPolicy fill) {
    if (x.rank() < 1) {
        throw std::invalid_argument("negative_temporal_shift: scalar input");
    }
    long length = static_cast<long>(x.dim(0));
    if (shift == 0 || std::labs(shift) >= length) {
        throw std::invalid_argument(
            "negative_temporal_shift: |shift| must lie in [1, length)");
    }
    (void)fill; // wrap is the only policy
    std::size_t row = row_size(x);
    Tensor out(x.shape());
    for (long t = 0; t < length; ++t) {
        long src = (t - shift) % length;
        if (src < 0) {
            src += length;
        }
        std::memcpy(&out.data()[static_cast<std::size_t>(t) * row],
                    &x.data()[static_cast<std::size_t>(src) * row], row * sizeof(double));
    }
    return out;
}

Tensor negative_segment_swap(const Tensor& x, const Tensor& donor, std::size_t split,
                             SwapSide side) {
    require_same_shape(x, donor, "negative_segment_swap");
    std::size_t length = x.dim(0);
    if (split == 0 || split >= length) {
        throw std::invalid_argument(
            "negative_segment_swap: split must be strictly inside (0, length)");
    }
    std::size_t row = row_size(x);
    Tensor out(x.shape());
    const Tensor& head = (side == SwapSide::kLeft) ? donor : x;
    const Tensor& tail = (side == SwapSide::kLeft) ? x : donor;
    std::memcpy(out.data().data(), head.data().data(), split * row * sizeof(double));
    std::memcpy(&out.data()[split * row], &tail.data()[split * row],
                (length - split) * row * sizeof(double));
    return out;
}

Tensor negative_full_swap(const Tensor& positive, const Tensor& donor) {
    require_same_shape(positive, donor, "negative_full_swap");
    return donor;
}

namespace {

// One negative for a single modality. `frames` is the temporal length of
// the video, used to convert frame-denominated shifts into native units.
Tensor make_negative(const std::vector<ModalPair>& dataset, std::size_t positive_index,
                     bool audio_modality, bool donors_available,
                     const NegativeConfig& config, Rng& rng, NegativeProvenance* prov) {
    const Tensor& positive = audio_modality ? dataset[positive_index].audio
                                            : dataset[positive_index].video;
    std::size_t frames = dataset[positive_index].video.dim(0);
    std::size_t length = positive.dim(0);

    // Shift and segment swap need a temporal axis to cut; full swap needs a
    // donor. Choose uniformly among whatever is feasible.
    std::vector<AugmentationKind> feasible;
    if (length >= 2) {
        feasible.push_back(AugmentationKind::kTemporalShift);
    }
    if (length >= 2 && donors_available) {
        feasible.push_back(AugmentationKind::kSegmentSwap);
    }
    if (donors_available) {
        feasible.push_back(AugmentationKind::kFullSwap);
    }
    if (feasible.empty()) {
        throw std::invalid_argument(
            "sample_negatives: no feasible augmentation for a length-1 modality "
            "without donors");
    }
    AugmentationKind kind = feasible[rng.index(feasible.size())];
    prov->kind = kind;

    if (kind == AugmentationKind::kTemporalShift) {
        long span = config.max_shift_frames - config.min_shift_frames + 1;
        long frame_shift = config.min_shift_frames + static_cast<long>(rng.index(span));
        if (rng.index(2) == 1) {
            frame_shift = -frame_shift;
        }
        long shift = frame_shift;
        if (audio_modality && length != frames) {
            double scale = static_cast<double>(length) / static_cast<double>(frames);
            shift = std::lround(static_cast<double>(frame_shift) * scale);
        }
        if (shift == 0) {
            shift = frame_shift > 0 ? 1 : -1;
        }
        long max_ok = static_cast<long>(length) - 1;
        if (std::labs(shift) > max_ok) {
            shift = shift > 0 ? max_ok : -max_ok;
        }
        prov->shift = shift;
        return negative_temporal_shift(positive, shift);
    }

    std::size_t donor_index = rng.index(dataset.size() - 1);
    if (donor_index >= positive_index) {
        ++donor_index;
    }
    prov->donor = donor_index;
    const Tensor& donor = audio_modality ? dataset[donor_index].audio
                                         : dataset[donor_index].video;

    if (kind == AugmentationKind::kSegmentSwap) {
        prov->split = 1 + rng.index(length - 1); // in (0, length)
        prov->side = rng.index(2) == 0 ? SwapSide::kLeft : SwapSide::kRight;
        return negative_segment_swap(positive, donor, prov->split, prov->side);
    }
    return negative_full_swap(positive, donor);
}

} // namespace

std::pair<NegativeBatch, NegativeBatch> sample_negatives(
    const std::vector<ModalPair>& dataset, std::size_t positive_index,
    const NegativeConfig& config, Rng& rng) {
    if (dataset.empty() || positive_index >= dataset.size()) {
        throw std::invalid_argument("sample_negatives: bad positive index");
    }
    if (config.count_per_modality < 1) {
        throw std::invalid_argument("sample_negatives: need at least one negative");
    }
    bool donors_available = dataset.size() >= 2;
    if (!donors_available) {
        std::clog << "sample_negatives: single-item dataset, falling back to "
                     "shift-only negatives\n";
    }

    NegativeBatch audio_batch, video_batch;
    for (std::size_t i = 0; i < config.count_per_modality; ++i) {
        NegativeProvenance prov;
        audio_batch.items.push_back(make_negative(dataset, positive_index, true,
                                                  donors_available, config, rng, &prov));
        audio_batch.provenance.push_back(prov);
    }
    for (std::size_t i = 0; i < config.count_per_modality; ++i) {
        NegativeProvenance prov;
        video_batch.items.push_back(make_negative(dataset, positive_index, false,
                                                  donors_available, config, rng, &prov));
        video_batch.provenance.push_back(prov);
    }
    return {std::move(audio_batch), std::move(video_batch)};
}

} // namespace cmmd
