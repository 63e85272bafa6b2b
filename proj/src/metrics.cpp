#include "cmmd/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "cmmd/rng.hpp"

namespace cmmd {

namespace {

constexpr double kEigenClip = 1e-8;

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error(std::string(what) + ": eigendecomposition failed");
    }
    Eigen::VectorXd vals = solver.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals[i] < -kEigenClip) {
            throw std::runtime_error(std::string(what) +
                                     ": matrix square root failed, eigenvalue " +
                                     std::to_string(vals[i]));
        }
        vals[i] = vals[i] > 0.0 ? std::sqrt(vals[i]) : 0.0;
    }
    return solver.eigenvectors() * vals.asDiagonal() * solver.eigenvectors().transpose();
}

} // namespace

GaussianStats fit_gaussian(const EmbeddingSet& set) {
    if (set.vectors.rank() != 2) {
        throw std::invalid_argument("fit_gaussian: expected an (M, d) matrix");
    }
    std::size_t m = set.count(), d = set.dim();
    if (m < 2) {
        throw std::invalid_argument("fit_gaussian: need at least two vectors");
    }
    GaussianStats stats;
    stats.mu.assign(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            stats.mu[j] += set.vectors.at2(i, j);
        }
    }
    for (auto& x : stats.mu) {
        x /= static_cast<double>(m);
    }
    stats.sigma.assign(d * d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double cj = set.vectors.at2(i, j) - stats.mu[j];
            for (std::size_t k = j; k < d; ++k) {
                stats.sigma[j * d + k] += cj * (set.vectors.at2(i, k) - stats.mu[k]);
            }
        }
    }
    double denom = static_cast<double>(m - 1);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
            double v = stats.sigma[j * d + k] / denom;
            stats.sigma[j * d + k] = v;
            stats.sigma[k * d + j] = v;
        }
    }
    return stats;
}

double frechet_distance(const GaussianStats& p, const GaussianStats& q) {
    std::size_t d = p.dim();
    if (q.dim() != d) {
        throw std::invalid_argument("frechet_distance: dimension mismatch");
    }
    auto di = static_cast<Eigen::Index>(d);
    Eigen::Map<const Eigen::MatrixXd> sp(p.sigma.data(), di, di);
    Eigen::Map<const Eigen::MatrixXd> sq(q.sigma.data(), di, di);

    double mean_term = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = p.mu[i] - q.mu[i];
        mean_term += diff * diff;
    }

    Eigen::MatrixXd sp_root = sqrt_psd(sp, "frechet_distance(sigma_p)");
    Eigen::MatrixXd product = sp_root * sq * sp_root;
    product = 0.5 * (product + product.transpose()).eval();
    Eigen::MatrixXd cross_root = sqrt_psd(product, "frechet_distance(product)");

    double result = mean_term + sp.trace() + sq.trace() - 2.0 * cross_root.trace();
    return result;
}

double per_sample_frechet(const EmbeddingSet& sample, const GaussianStats& reference) {
    return frechet_distance(fit_gaussian(sample), reference);
}

double kernel_distance(const EmbeddingSet& x, const EmbeddingSet& y) {
    if (x.vectors.rank() != 2 || y.vectors.rank() != 2 || x.dim() != y.dim()) {
        throw std::invalid_argument("kernel_distance: dimension mismatch");
    }
    std::size_t m = x.count(), n = y.count(), d = x.dim();
    if (m < 2 || n < 2) {
        throw std::invalid_argument("kernel_distance: need at least two vectors per set");
    }
    auto kernel = [d](const double* u, const double* w) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            dot += u[i] * w[i];
        }
        double base = dot / static_cast<double>(d) + 1.0;
        return base * base * base;
    };
    auto row = [](const EmbeddingSet& s, std::size_t i) {
        return &s.vectors.data()[i * s.dim()];
    };

    double kxx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j) {
                kxx += kernel(row(x, i), row(x, j));
            }
        }
    }
    double kyy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) {
                kyy += kernel(row(y, i), row(y, j));
            }
        }
    }
    double kxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            kxy += kernel(row(x, i), row(y, j));
        }
    }
    double md = static_cast<double>(m), nd = static_cast<double>(n);
    return kxx / (md * (md - 1.0)) + kyy / (nd * (nd - 1.0)) - 2.0 * kxy / (md * nd);
}

EmbeddingSet random_projection_embedder(const Tensor& frames, std::size_t d,
                                        std::uint64_t seed) {
    if (frames.rank() != 2) {
        throw std::invalid_argument("random_projection_embedder: expected (T, D_in) frames");
    }
    std::size_t t = frames.dim(0), din = frames.dim(1);
    Rng rng(seed);
    std::vector<double> projection(d * din);
    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& x : projection) {
        x = scale * rng.normal();
    }

    EmbeddingSet out;
    out.vectors = Tensor({t, d});
    for (std::size_t i = 0; i < t; ++i) {
        const double* src = &frames.data()[i * din];
        for (std::size_t j = 0; j < d; ++j) {
            const double* prow = &projection[j * din];
            double acc = 0.0;
            for (std::size_t k = 0; k < din; ++k) {
                acc += prow[k] * src[k];
            }
            out.vectors.at2(i, j) = std::tanh(acc);
        }
    }
    return out;
}

} // namespace cmmd
