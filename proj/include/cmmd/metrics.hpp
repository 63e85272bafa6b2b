#pragma once

#include <cstdint>
#include <vector>

#include "cmmd/tensor.hpp"

namespace cmmd {

// (M, d) matrix of embedding vectors, one row per frame or clip.
struct EmbeddingSet {
    Tensor vectors; // rank 2

    std::size_t count() const { return vectors.dim(0); }
    std::size_t dim() const { return vectors.dim(1); }
};

struct GaussianStats {
    std::vector<double> mu;    // d
    std::vector<double> sigma; // row-major d x d, unbiased (M-1)

    std::size_t dim() const { return mu.size(); }
};

// Sample mean and unbiased covariance; needs at least two rows.
GaussianStats fit_gaussian(const EmbeddingSet& set);

// ||mu_p - mu_q||^2 + tr(S_p + S_q - 2 (S_p S_q)^{1/2}), with the matrix
// square root taken through the symmetrized product. Eigenvalues in
// [-1e-8, 0) are clipped to zero; anything more negative is an error.
double frechet_distance(const GaussianStats& p, const GaussianStats& q);

// Frechet distance between one clip's frame embeddings and a reference.
double per_sample_frechet(const EmbeddingSet& sample, const GaussianStats& reference);

// Unbiased MMD^2 estimate with the cubic polynomial kernel
// k(u, w) = (u.w / d + 1)^3.
double kernel_distance(const EmbeddingSet& x, const EmbeddingSet& y);

// Frozen seeded Gaussian projection scaled by 1/sqrt(d), tanh squashed.
// Desk-scale stand-in for pretrained embedding networks.
EmbeddingSet random_projection_embedder(const Tensor& frames, std::size_t d,
                                        std::uint64_t seed);

} // namespace cmmd
