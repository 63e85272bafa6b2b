#include "cmmd/fusion.hpp"

#include <stdexcept>

namespace cmmd {

FusedPair easy_fuse(const Tensor& video, const Tensor& audio) {
    require_video(video, "easy_fuse");
    require_audio(audio, "easy_fuse");
    std::size_t frames = video.dim(0), height = video.dim(2), width = video.dim(3);
    std::size_t steps = audio.dim(0);

    Tensor audio_at_frames = nn_resample_time(audio, frames);          // (F, C_a)
    Tensor audio_planes = broadcast_spatial(audio_at_frames, height, width);
    Tensor pooled = spatial_mean_pool(video);                          // (F, C_v)
    Tensor pooled_at_steps = nn_resample_time(pooled, steps);          // (T, C_v)

    FusedPair fused;
    fused.video = concat_channels(video, audio_planes);
    fused.audio = concat_channels(audio, pooled_at_steps);
    return fused;
}

std::pair<Tensor, Tensor> easy_fuse_vjp(const Tensor& cot_video_fused,
                                        const Tensor& cot_audio_fused,
                                        const std::vector<std::size_t>& video_shape,
                                        const std::vector<std::size_t>& audio_shape) {
    std::size_t frames = video_shape[0], cv = video_shape[1];
    std::size_t height = video_shape[2], width = video_shape[3];
    std::size_t steps = audio_shape[0], ca = audio_shape[1];
    std::size_t plane = height * width;
    if (cot_video_fused.rank() != 4 || cot_video_fused.dim(0) != frames ||
        cot_video_fused.dim(1) != cv + ca || cot_video_fused.dim(2) != height ||
        cot_video_fused.dim(3) != width || cot_audio_fused.rank() != 2 ||
        cot_audio_fused.dim(0) != steps || cot_audio_fused.dim(1) != ca + cv) {
        throw std::invalid_argument("easy_fuse_vjp: cotangent shapes do not match");
    }

    Tensor d_video(video_shape);
    Tensor d_audio(audio_shape);

    // Direct (leading-channel) paths.
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < cv; ++c) {
            const double* src = &cot_video_fused.data()[(f * (cv + ca) + c) * plane];
            double* dst = &d_video.data()[(f * cv + c) * plane];
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] += src[i];
            }
        }
    }
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < ca; ++c) {
            d_audio.at2(t, c) += cot_audio_fused.at2(t, c);
        }
    }

    // Video branch: audio -> resample(T->F) -> broadcast. Adjoint sums the
    // plane then scatter-adds over the resampling index.
    for (std::size_t f = 0; f < frames; ++f) {
        std::size_t t = nn_index(f, steps, frames);
        for (std::size_t c = 0; c < ca; ++c) {
            const double* src = &cot_video_fused.data()[(f * (cv + ca) + cv + c) * plane];
            double sum = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                sum += src[i];
            }
            d_audio.at2(t, c) += sum;
        }
    }

    // Audio branch: video -> pool -> resample(F->T). Adjoint scatter-adds
    // into the pooled features then spreads uniformly over the plane.
    Tensor d_pooled({frames, cv});
    for (std::size_t t = 0; t < steps; ++t) {
        std::size_t f = nn_index(t, frames, steps);
        for (std::size_t c = 0; c < cv; ++c) {
            d_pooled.at2(f, c) += cot_audio_fused.at2(t, ca + c);
        }
    }
    double inv_plane = 1.0 / static_cast<double>(plane);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < cv; ++c) {
            double g = d_pooled.at2(f, c) * inv_plane;
            double* dst = &d_video.data()[(f * cv + c) * plane];
            for (std::size_t i = 0; i < plane; ++i) {
                dst[i] += g;
            }
        }
    }

    return {std::move(d_video), std::move(d_audio)};
}

bool fused_attention_contract(const FusedPair& fused, const Tensor& video,
                              const Tensor& audio) {
    require_video(video, "fused_attention_contract");
    require_audio(audio, "fused_attention_contract");
    std::size_t cv = video.dim(1);
    std::size_t ca = audio.dim(1);
    if (fused.video.rank() != 4 || fused.audio.rank() != 2 ||
        fused.video.dim(1) != cv + ca || fused.audio.dim(1) != ca + cv) {
        return false;
    }

    // Recompute what the appended blocks must hold and compare per
    // temporal position; any divergence means the position no longer
    // carries the opposite modality.
    FusedPair expected = easy_fuse(video, audio);
    std::size_t frames = video.dim(0), plane = video.dim(2) * video.dim(3);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = cv; c < cv + ca; ++c) {
            for (std::size_t i = 0; i < plane; ++i) {
                std::size_t flat = ((f * (cv + ca) + c) * plane) + i;
                if (fused.video[flat] != expected.video[flat]) {
                    return false;
                }
            }
        }
    }
    std::size_t steps = audio.dim(0);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = ca; c < ca + cv; ++c) {
            if (fused.audio.at2(t, c) != expected.audio.at2(t, c)) {
                return false;
            }
        }
    }
    return true;
}

} // namespace cmmd
