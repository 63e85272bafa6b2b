#pragma once

#include "cmmd/tensor.hpp"

namespace cmmd {

// Cross-modal merge: each fused tensor carries its own channels first and
// the other modality's time-aligned channels appended.
//   video branch: a resampled to F steps, broadcast over (H, W), appended.
//   audio branch: v pooled over (H, W), resampled to T steps, appended.
struct FusedPair {
    Tensor video; // (F, C_v + C_a, H, W)
    Tensor audio; // (T, C_a + C_v)
};

FusedPair easy_fuse(const Tensor& video, const Tensor& audio);

// Structural precondition for treating self-attention over fused tensors
// as implicit cross-attention: every temporal position of each fused
// tensor must carry at least one channel derived from the opposite
// modality. Channel provenance is known from construction, so this checks
// that the appended block at every position actually reflects the source
// modality (a zeroed-out block with a nonconstant source fails).
bool fused_attention_contract(const FusedPair& fused, const Tensor& video,
                              const Tensor& audio);

// Adjoint of easy_fuse: maps cotangents of the fused outputs back to
// cotangents of the original (video, audio) inputs. Needed by models that
// differentiate through the fusion.
std::pair<Tensor, Tensor> easy_fuse_vjp(const Tensor& cot_video_fused,
                                        const Tensor& cot_audio_fused,
                                        const std::vector<std::size_t>& video_shape,
                                        const std::vector<std::size_t>& audio_shape);

} // namespace cmmd
