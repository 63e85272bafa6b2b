#include "cmmd/denoiser.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace cmmd {

namespace {

Eigen::Map<const Eigen::MatrixXd> sigma_map(const GaussianWorld& world) {
    auto d = static_cast<Eigen::Index>(world.dim());
    return Eigen::Map<const Eigen::MatrixXd>(world.sigma.data(), d, d);
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

} // namespace

std::pair<Tensor, Tensor> Denoiser::input_vjp(const Tensor&, const Tensor&, std::size_t,
                                              const Tensor&, const Tensor&) const {
    throw CapabilityError("this denoiser does not provide input gradients");
}

void Denoiser::check_inputs(const Tensor& video_n, const Tensor& audio_n, std::size_t n) const {
    if (video_n.shape() != video_shape() || audio_n.shape() != audio_shape()) {
        throw std::invalid_argument("denoiser: input shapes do not match the configured shapes");
    }
    if (n < 1 || n > schedule().steps()) {
        throw std::invalid_argument("denoiser: step out of range");
    }
}

void GaussianWorld::validate() const {
    std::size_t d = dim();
    if (sigma.size() != d * d) {
        throw std::invalid_argument("GaussianWorld: sigma must be D x D");
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (std::abs(sigma[i * d + j] - sigma[j * d + i]) > 1e-10) {
                throw std::invalid_argument("GaussianWorld: sigma is not symmetric");
            }
        }
    }
    auto s = sigma_map(*this);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    if (solver.info() != Eigen::Success || solver.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("GaussianWorld: sigma is not positive definite");
    }
}

std::vector<double> analytic_posterior_mean(const GaussianWorld& world,
                                            std::span<const double> x_n, double abar) {
    if (!(abar > 0.0 && abar < 1.0)) {
        throw std::invalid_argument("analytic_posterior_mean: abar must lie in (0, 1)");
    }
    std::size_t d = world.dim();
    if (x_n.size() != d) {
        throw std::invalid_argument("analytic_posterior_mean: dimension mismatch");
    }
    double root = std::sqrt(abar);
    auto s = sigma_map(world);
    Eigen::MatrixXd system = abar * s + (1.0 - abar) * Eigen::MatrixXd::Identity(
                                                           static_cast<Eigen::Index>(d),
                                                           static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::VectorXd> mu(world.mu.data(), static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::VectorXd> x(x_n.data(), static_cast<Eigen::Index>(d));
    Eigen::VectorXd innovation = x - root * mu;
    Eigen::VectorXd solved = system.ldlt().solve(innovation);
    Eigen::VectorXd result = mu + root * (s * solved);
    return std::vector<double>(result.data(), result.data() + d);
}

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(GaussianWorld world,
                                                   std::vector<std::size_t> video_shape,
                                                   std::vector<std::size_t> audio_shape,
                                                   NoiseSchedule schedule)
    : world_(std::move(world)),
      video_shape_(std::move(video_shape)),
      audio_shape_(std::move(audio_shape)),
      schedule_(std::move(schedule)) {
    world_.validate();
    video_size_ = shape_product(video_shape_);
    audio_size_ = shape_product(audio_shape_);
    if (video_size_ + audio_size_ != world_.dim()) {
        throw std::invalid_argument(
            "AnalyticGaussianDenoiser: world dimension must equal D_v + D_a");
    }

    // Precompute K_n = sqrt(abar) sigma (abar sigma + (1-abar) I)^-1 for
    // every step so prediction is a single mat-vec and a frozen model is
    // safe to share across threads.
    std::size_t d = world_.dim();
    auto di = static_cast<Eigen::Index>(d);
    auto s = sigma_map(world_);
    Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(di, di);
    gains_.resize(schedule_.steps());
    for (std::size_t n = 1; n <= schedule_.steps(); ++n) {
        double abar = schedule_.alpha_bar(n);
        Eigen::MatrixXd system = abar * s + (1.0 - abar) * identity;
        Eigen::MatrixXd gain = std::sqrt(abar) * (s * system.ldlt().solve(identity));
        gain = 0.5 * (gain + gain.transpose()).eval(); // analytically symmetric
        gains_[n - 1].assign(gain.data(), gain.data() + d * d);
    }
}

std::span<const double> AnalyticGaussianDenoiser::gain(std::size_t n) const {
    if (n < 1 || n > schedule_.steps()) {
        throw std::invalid_argument("gain: step out of range");
    }
    return gains_[n - 1];
}

DenoiserOutput AnalyticGaussianDenoiser::predict(const Tensor& video_n, const Tensor& audio_n,
                                                 std::size_t n) const {
    check_inputs(video_n, audio_n, n);
    double abar = schedule_.alpha_bar(n);
    double root = std::sqrt(abar);
    double root1m = std::sqrt(1.0 - abar);
    std::size_t d = world_.dim();

    std::vector<double> x(d);
    std::copy(video_n.data().begin(), video_n.data().end(), x.begin());
    std::copy(audio_n.data().begin(), audio_n.data().end(), x.begin() + video_size_);

    // x0_hat = mu + K (x - sqrt(abar) mu); v_hat = (sqrt(abar) x - x0_hat) / sqrt(1-abar)
    const std::vector<double>& k = gains_[n - 1];
    std::vector<double> x0_hat(d);
    for (std::size_t i = 0; i < d; ++i) {
        double acc = world_.mu[i];
        const double* row = &k[i * d];
        for (std::size_t j = 0; j < d; ++j) {
            acc += row[j] * (x[j] - root * world_.mu[j]);
        }
        x0_hat[i] = acc;
    }

    DenoiserOutput out;
    out.v_video = Tensor(video_shape_);
    out.v_audio = Tensor(audio_shape_);
    for (std::size_t i = 0; i < video_size_; ++i) {
        out.v_video[i] = (root * x[i] - x0_hat[i]) / root1m;
    }
    for (std::size_t i = 0; i < audio_size_; ++i) {
        out.v_audio[i] = (root * x[video_size_ + i] - x0_hat[video_size_ + i]) / root1m;
    }
    return out;
}

std::pair<Tensor, Tensor> AnalyticGaussianDenoiser::input_vjp(const Tensor& video_n,
                                                              const Tensor& audio_n,
                                                              std::size_t n,
                                                              const Tensor& cot_video,
                                                              const Tensor& cot_audio) const {
    check_inputs(video_n, audio_n, n);
    if (cot_video.shape() != video_shape_ || cot_audio.shape() != audio_shape_) {
        throw std::invalid_argument("input_vjp: cotangent shapes do not match");
    }
    double abar = schedule_.alpha_bar(n);
    double root = std::sqrt(abar);
    double root1m = std::sqrt(1.0 - abar);
    std::size_t d = world_.dim();

    // d v_hat / d x = (sqrt(abar) I - K) / sqrt(1-abar); K is symmetric.
    std::vector<double> cot(d);
    std::copy(cot_video.data().begin(), cot_video.data().end(), cot.begin());
    std::copy(cot_audio.data().begin(), cot_audio.data().end(), cot.begin() + video_size_);

    const std::vector<double>& k = gains_[n - 1];
    std::vector<double> grad(d);
    for (std::size_t i = 0; i < d; ++i) {
        double acc = root * cot[i];
        const double* row = &k[i * d];
        for (std::size_t j = 0; j < d; ++j) {
            acc -= row[j] * cot[j];
        }
        grad[i] = acc / root1m;
    }

    Tensor d_video(video_shape_);
    Tensor d_audio(audio_shape_);
    std::copy(grad.begin(), grad.begin() + video_size_, d_video.data().begin());
    std::copy(grad.begin() + video_size_, grad.end(), d_audio.data().begin());
    return {std::move(d_video), std::move(d_audio)};
}

} // namespace cmmd
