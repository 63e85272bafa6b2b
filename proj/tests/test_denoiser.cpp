#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cmmd/checkpoint.hpp"
#include "cmmd/denoiser.hpp"
#include "cmmd/forward.hpp"
#include "cmmd/fusion.hpp"
#include "cmmd/rng.hpp"
#include "cmmd/synthdata.hpp"
#include "cmmd/toynet.hpp"

using namespace cmmd;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.normal();
    }
    return t;
}

GaussianWorld random_spd_world(std::size_t dim, Rng& rng) {
    // sigma = A A^T / dim + 0.5 I, guaranteed SPD
    std::vector<double> a(dim * dim);
    for (auto& x : a) {
        x = rng.normal();
    }
    GaussianWorld world;
    world.mu.resize(dim);
    for (auto& x : world.mu) {
        x = rng.normal();
    }
    world.sigma.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                acc += a[i * dim + k] * a[j * dim + k];
            }
            world.sigma[i * dim + j] = acc / static_cast<double>(dim);
        }
        world.sigma[i * dim + i] += 0.5;
    }
    return world;
}

} // namespace

TEST_CASE("analytic posterior mean collapses for the identity world") {
    GaussianWorld world = identity_world(3);
    std::vector<double> x_n{1.0, -2.0, 0.5};
    double abar = 0.37;
    auto post = analytic_posterior_mean(world, x_n, abar);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(post[i] == doctest::Approx(std::sqrt(abar) * x_n[i]).epsilon(1e-12));
    }
}

TEST_CASE("analytic posterior mean approaches x_n as abar -> 1") {
    Rng rng(1);
    GaussianWorld world = random_spd_world(4, rng);
    std::vector<double> x_n{0.3, -0.1, 1.2, 0.7};
    auto post = analytic_posterior_mean(world, x_n, 1.0 - 1e-9);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(post[i] == doctest::Approx(x_n[i]).epsilon(1e-4));
    }
}

TEST_CASE("analytic posterior mean: hand-evaluated scalar case") {
    // D=1, mu=2, sigma=4, abar=0.5, x_n=1:
    // E[x0|x_n] = 2 + (sqrt(.5)*4 / (.5*4 + .5)) * (1 - sqrt(.5)*2)
    GaussianWorld world;
    world.mu = {2.0};
    world.sigma = {4.0};
    auto post = analytic_posterior_mean(world, std::vector<double>{1.0}, 0.5);
    double root = std::sqrt(0.5);
    double expected = 2.0 + (root * 4.0 / (0.5 * 4.0 + 0.5)) * (1.0 - root * 2.0);
    CHECK(post[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(post[0] == doctest::Approx(1.531).epsilon(1e-3));
}

TEST_CASE("analytic posterior mean matches a Monte-Carlo Bayes oracle") {
    // D=6 random SPD world, 200k draws of x0 with exact likelihood weights:
    // E[x0 | x_n = q] = sum w_i x0_i / sum w_i,
    // w_i = exp(-||q - sqrt(abar) x0_i||^2 / (2 (1 - abar)))
    Rng rng(7);
    GaussianWorld world = random_spd_world(6, rng);
    double abar = 0.4;

    std::vector<ModalPair> samples = gaussian_pairs(world, 200000, {1, 1, 1, 3}, {3, 1}, 11);
    std::vector<double> q{0.5, -0.2, 0.1, 0.8, -0.5, 0.3};
    std::vector<double> accum(6, 0.0);
    double weight_sum = 0.0, weight_sq = 0.0;
    for (const auto& pair : samples) {
        std::vector<double> x0(6);
        for (std::size_t i = 0; i < 3; ++i) {
            x0[i] = pair.video[i];
            x0[3 + i] = pair.audio[i];
        }
        double dist = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            double d = q[i] - std::sqrt(abar) * x0[i];
            dist += d * d;
        }
        double w = std::exp(-dist / (2.0 * (1.0 - abar)));
        weight_sum += w;
        weight_sq += w * w;
        for (std::size_t i = 0; i < 6; ++i) {
            accum[i] += w * x0[i];
        }
    }
    double effective = weight_sum * weight_sum / weight_sq;
    REQUIRE(effective > 1000.0); // enough effective samples for a 1% check

    auto post = analytic_posterior_mean(world, q, abar);
    for (std::size_t i = 0; i < 6; ++i) {
        double mc = accum[i] / weight_sum;
        CHECK(std::abs(mc - post[i]) < std::max(0.01 * std::abs(post[i]), 0.01));
    }
}

TEST_CASE("analytic posterior mean is linear in x_n") {
    Rng rng(2);
    GaussianWorld world = random_spd_world(5, rng);
    double abar = 0.6;
    std::vector<double> a{1.0, 0.5, -0.5, 0.2, 0.9};
    std::vector<double> b{-0.3, 1.1, 0.7, -0.8, 0.4};
    std::vector<double> zero(5, 0.0);

    auto pa = analytic_posterior_mean(world, a, abar);
    auto pb = analytic_posterior_mean(world, b, abar);
    auto p0 = analytic_posterior_mean(world, zero, abar);
    std::vector<double> combo(5);
    for (std::size_t i = 0; i < 5; ++i) {
        combo[i] = 0.25 * a[i] + 0.75 * b[i];
    }
    auto pc = analytic_posterior_mean(world, combo, abar);
    for (std::size_t i = 0; i < 5; ++i) {
        // affine map: f(0.25a + 0.75b) = 0.25 f(a) + 0.75 f(b) (weights sum to 1)
        CHECK(pc[i] == doctest::Approx(0.25 * pa[i] + 0.75 * pb[i]).epsilon(1e-10));
        (void)p0;
    }
}

TEST_CASE("AnalyticGaussianDenoiser matches the scalar posterior closed form") {
    NoiseSchedule sched = cosine_schedule(100, 0.008);
    GaussianWorld world = identity_world(2);
    AnalyticGaussianDenoiser model(world, {1, 1, 1, 1}, {1, 1}, sched);

    std::size_t n = 60;
    double abar = sched.alpha_bar(n);
    Tensor v_n({1, 1, 1, 1}, {0.8});
    Tensor a_n({1, 1}, {-1.3});
    DenoiserOutput out = model.predict(v_n, a_n, n);

    // mu=0, sigma=I: x0_hat = sqrt(abar) x_n, v_hat = (sqrt(abar) x_n - x0_hat)/sqrt(1-abar)
    double x0_v = std::sqrt(abar) * 0.8;
    double expected_v = (std::sqrt(abar) * 0.8 - x0_v) / std::sqrt(1.0 - abar);
    CHECK(out.v_video[0] == doctest::Approx(expected_v).epsilon(1e-12));
    CHECK(out.v_video[0] == doctest::Approx(0.0).epsilon(1e-12));

    // cross-check against the free-function posterior mean
    auto post = analytic_posterior_mean(world, std::vector<double>{0.8, -1.3}, abar);
    double v_from_post = (std::sqrt(abar) * 0.8 - post[0]) / std::sqrt(1.0 - abar);
    CHECK(out.v_video[0] == doctest::Approx(v_from_post).epsilon(1e-12));
}

TEST_CASE("analytic denoiser empirical loss beats perturbed predictors") {
    // MMSE optimality on 10k draws: posterior-mean predictor vs +delta
    NoiseSchedule sched = cosine_schedule(1000, 0.008);
    Rng rng(31);
    GaussianWorld world = block_world(4, 4, 0.8, 0.3, -0.2);
    AnalyticGaussianDenoiser model(world, {1, 1, 2, 2}, {4, 1}, sched);

    std::size_t n = 500;
    double abar = sched.alpha_bar(n);
    auto data = gaussian_pairs(world, 10000, {1, 1, 2, 2}, {4, 1}, 77);

    Rng noise_rng(78);
    std::vector<double> residual_sum(8, 0.0);
    double base_loss = 0.0;
    for (const auto& pair : data) {
        Tensor eps_v = normal_like(pair.video, noise_rng);
        Tensor eps_a = normal_like(pair.audio, noise_rng);
        Tensor v_n = diffuse(pair.video, eps_v, abar);
        Tensor a_n = diffuse(pair.audio, eps_a, abar);
        Tensor tv = velocity(pair.video, eps_v, abar);
        Tensor ta = velocity(pair.audio, eps_a, abar);
        DenoiserOutput out = model.predict(v_n, a_n, n);
        for (std::size_t i = 0; i < 4; ++i) {
            double rv = tv[i] - out.v_video[i];
            double ra = ta[i] - out.v_audio[i];
            residual_sum[i] += rv;
            residual_sum[4 + i] += ra;
            base_loss += rv * rv / 4.0 + ra * ra / 4.0;
        }
    }
    base_loss /= 10000.0;

    Rng delta_rng(79);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> delta(8);
        double norm = 0.0;
        for (auto& d : delta) {
            d = delta_rng.normal();
            norm += d * d;
        }
        norm = std::sqrt(norm);
        for (auto& d : delta) {
            d *= 0.1 / norm;
        }
        // loss(pred + delta) - loss(pred) = sum_m (||delta_m||^2 - 2 delta_m . rbar_m)/size_m
        double diff = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            diff += (delta[i] * delta[i] -
                     2.0 * delta[i] * residual_sum[i] / 10000.0) / 4.0;
            diff += (delta[4 + i] * delta[4 + i] -
                     2.0 * delta[4 + i] * residual_sum[4 + i] / 10000.0) / 4.0;
        }
        CHECK(diff > 0.0); // perturbed predictor strictly worse
    }
    CHECK(base_loss > 0.0);
}

TEST_CASE("ToyNet zero weights produce zero output") {
    ToyNetConfig config;
    config.video_shape = {2, 1, 2, 2};
    config.audio_shape = {5, 2};
    config.hidden = {6};
    ToyNet net(config, cosine_schedule(50, 0.008), 3);
    std::fill(net.parameters().begin(), net.parameters().end(), 0.0);

    Rng rng(4);
    Tensor v = random_tensor(config.video_shape, rng);
    Tensor a = random_tensor(config.audio_shape, rng);
    DenoiserOutput out = net.predict(v, a, 10);
    CHECK(out.v_video.shape() == config.video_shape);
    CHECK(out.v_audio.shape() == config.audio_shape);
    for (double x : out.v_video.data()) {
        CHECK(x == 0.0);
    }
    for (double x : out.v_audio.data()) {
        CHECK(x == 0.0);
    }
}

namespace {

// Independent forward pass used as the oracle for ToyNet::forward.
DenoiserOutput reference_forward(const ToyNet& net, const Tensor& v, const Tensor& a,
                                 std::size_t n) {
    const ToyNetConfig& config = net.config();
    FusedPair fused = easy_fuse(v, a);
    std::vector<double> input(fused.video.data().begin(), fused.video.data().end());
    input.insert(input.end(), fused.audio.data().begin(), fused.audio.data().end());
    std::size_t half = config.time_features / 2;
    double t = static_cast<double>(n) / static_cast<double>(net.schedule().steps());
    for (std::size_t i = 0; i < half; ++i) {
        double freq = std::pow(
            1000.0, half > 1 ? static_cast<double>(i) / static_cast<double>(half - 1) : 0.0);
        input.push_back(std::sin(freq * t));
        input.push_back(std::cos(freq * t));
    }

    const auto& widths = net.layer_widths();
    const std::vector<double>& params = net.parameters();
    std::size_t offset = 0;
    std::vector<double> current = input;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        std::vector<double> next(widths[l + 1], 0.0);
        for (std::size_t i = 0; i < widths[l + 1]; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < widths[l]; ++j) {
                acc += params[offset + i * widths[l] + j] * current[j];
            }
            next[i] = acc;
        }
        offset += widths[l + 1] * widths[l];
        for (std::size_t i = 0; i < widths[l + 1]; ++i) {
            next[i] += params[offset + i];
        }
        offset += widths[l + 1];
        if (l + 2 < widths.size()) {
            for (auto& x : next) {
                x = std::tanh(x);
            }
        }
        current = std::move(next);
    }

    std::size_t video_size = 1;
    for (std::size_t d : config.video_shape) video_size *= d;
    DenoiserOutput out;
    out.v_video = Tensor(config.video_shape,
                         std::vector<double>(current.begin(),
                                             current.begin() + static_cast<long>(video_size)));
    out.v_audio = Tensor(config.audio_shape,
                         std::vector<double>(current.begin() + static_cast<long>(video_size),
                                             current.end()));
    return out;
}

} // namespace

TEST_CASE("ToyNet forward matches an independent reimplementation") {
    ToyNetConfig config;
    config.video_shape = {3, 2, 2, 2};
    config.audio_shape = {7, 3};
    config.hidden = {10, 8};
    ToyNet net(config, cosine_schedule(100, 0.008), 5);

    Rng rng(6);
    Tensor v = random_tensor(config.video_shape, rng);
    Tensor a = random_tensor(config.audio_shape, rng);

    DenoiserOutput fast = net.predict(v, a, 42);
    DenoiserOutput slow = reference_forward(net, v, a, 42);
    for (std::size_t i = 0; i < fast.v_video.size(); ++i) {
        CHECK(fast.v_video[i] == doctest::Approx(slow.v_video[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < fast.v_audio.size(); ++i) {
        CHECK(fast.v_audio[i] == doctest::Approx(slow.v_audio[i]).epsilon(1e-12));
    }

    // doubling one hidden weight matrix changes outputs consistently
    std::size_t first_w = config.hidden[0] * net.layer_widths()[0];
    for (std::size_t i = 0; i < first_w; ++i) {
        net.parameters()[i] *= 2.0;
    }
    DenoiserOutput fast2 = net.predict(v, a, 42);
    DenoiserOutput slow2 = reference_forward(net, v, a, 42);
    for (std::size_t i = 0; i < fast2.v_video.size(); ++i) {
        CHECK(fast2.v_video[i] == doctest::Approx(slow2.v_video[i]).epsilon(1e-12));
    }
    CHECK(std::abs(fast2.v_video[0] - fast.v_video[0]) > 0.0);
}

namespace {

void check_toynet_gradients(const ToyNetConfig& config, std::uint64_t seed) {
    ToyNet net(config, cosine_schedule(60, 0.008), seed);
    Rng rng(seed + 100);
    Tensor v = random_tensor(config.video_shape, rng);
    Tensor a = random_tensor(config.audio_shape, rng);
    Tensor cot_v = random_tensor(config.video_shape, rng);
    Tensor cot_a = random_tensor(config.audio_shape, rng);
    std::size_t n = 17;

    auto objective = [&]() {
        DenoiserOutput out = net.predict(v, a, n);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.v_video.size(); ++i) {
            acc += out.v_video[i] * cot_v[i];
        }
        for (std::size_t i = 0; i < out.v_audio.size(); ++i) {
            acc += out.v_audio[i] * cot_a[i];
        }
        return acc;
    };

    ToyNet::Workspace ws;
    net.forward(v, a, n, &ws);
    std::vector<double> grads(net.parameter_count(), 0.0);
    Tensor d_v, d_a;
    net.backward(ws, cot_v, cot_a, 1.0, &grads, &d_v, &d_a);

    const double h = 1e-5;
    // parameter gradients vs central finite differences
    Rng pick(seed + 200);
    for (int k = 0; k < 60; ++k) {
        std::size_t i = pick.index(net.parameter_count());
        double saved = net.parameters()[i];
        net.parameters()[i] = saved + h;
        double up = objective();
        net.parameters()[i] = saved - h;
        double down = objective();
        net.parameters()[i] = saved;
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(grads[i]), 1e-8});
        CHECK(std::abs(grads[i] - fd) / denom < 1e-4);
    }
    // input gradients
    for (std::size_t i = 0; i < v.size(); ++i) {
        double saved = v[i];
        v[i] = saved + h;
        double up = objective();
        v[i] = saved - h;
        double down = objective();
        v[i] = saved;
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(d_v[i]), 1e-8});
        CHECK(std::abs(d_v[i] - fd) / denom < 1e-4);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        double saved = a[i];
        a[i] = saved + h;
        double up = objective();
        a[i] = saved - h;
        double down = objective();
        a[i] = saved;
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(d_a[i]), 1e-8});
        CHECK(std::abs(d_a[i] - fd) / denom < 1e-4);
    }
}

} // namespace

TEST_CASE("ToyNet gradients match finite differences across architectures") {
    ToyNetConfig one_hidden;
    one_hidden.video_shape = {2, 1, 2, 2};
    one_hidden.audio_shape = {5, 2};
    one_hidden.hidden = {8};
    check_toynet_gradients(one_hidden, 21);

    ToyNetConfig two_hidden;
    two_hidden.video_shape = {3, 2, 2, 2};
    two_hidden.audio_shape = {6, 2};
    two_hidden.hidden = {10, 6};
    check_toynet_gradients(two_hidden, 22);

    ToyNetConfig linear; // no hidden layer: single dense map
    linear.video_shape = {2, 2, 2, 2};
    linear.audio_shape = {4, 3};
    linear.hidden = {};
    check_toynet_gradients(linear, 23);
}

TEST_CASE("ToyNet zero cotangent gives zero gradients") {
    ToyNetConfig config;
    config.video_shape = {2, 1, 2, 2};
    config.audio_shape = {3, 2};
    config.hidden = {5};
    ToyNet net(config, cosine_schedule(40, 0.008), 9);

    Rng rng(10);
    Tensor v = random_tensor(config.video_shape, rng);
    Tensor a = random_tensor(config.audio_shape, rng);
    ToyNet::Workspace ws;
    net.forward(v, a, 7, &ws);

    std::vector<double> grads(net.parameter_count(), 0.0);
    Tensor d_v, d_a;
    net.backward(ws, Tensor(config.video_shape), Tensor(config.audio_shape), 1.0, &grads,
                 &d_v, &d_a);
    for (double g : grads) {
        CHECK(g == 0.0);
    }
    for (double g : d_v.data()) {
        CHECK(g == 0.0);
    }
    for (double g : d_a.data()) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("input gradient of a squared reconstruction error checks out") {
    // grad_a ||target - v_video||^2 via vjp vs finite differences
    ToyNetConfig config;
    config.video_shape = {2, 1, 2, 2};
    config.audio_shape = {5, 2};
    config.hidden = {7};
    ToyNet net(config, cosine_schedule(60, 0.008), 33);

    Rng rng(34);
    Tensor v = random_tensor(config.video_shape, rng);
    Tensor a = random_tensor(config.audio_shape, rng);
    Tensor target = random_tensor(config.video_shape, rng);
    std::size_t n = 25;

    auto objective = [&](const Tensor& audio) {
        DenoiserOutput out = net.predict(v, audio, n);
        double acc = 0.0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            double d = target[i] - out.v_video[i];
            acc += d * d;
        }
        return acc;
    };

    DenoiserOutput out = net.predict(v, a, n);
    Tensor cot_v = scale_add(out.v_video, 2.0, target, -2.0); // d/dv_video of ||t - v||^2
    auto [d_v, d_a] = net.input_vjp(v, a, n, cot_v, Tensor(config.audio_shape));
    (void)d_v;

    const double h = 1e-5;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Tensor plus = a, minus = a;
        plus[i] += h;
        minus[i] -= h;
        double fd = (objective(plus) - objective(minus)) / (2.0 * h);
        double denom = std::max({std::abs(fd), std::abs(d_a[i]), 1e-8});
        CHECK(std::abs(d_a[i] - fd) / denom < 1e-4);
    }
}

TEST_CASE("checkpoint round trip is bit-exact and preserves predictions") {
    ToyNetConfig config;
    config.video_shape = {2, 2, 2, 2};
    config.audio_shape = {6, 2};
    config.hidden = {9};
    ScheduleDescriptor desc{"cosine", 80, 0.008};
    ToyNet net(config, make_schedule(desc), 55);

    std::string dir = (std::filesystem::temp_directory_path() / "cmmd_ckpt_test").string();
    std::filesystem::create_directories(dir);
    std::string path1 = dir + "/a.ckpt";
    std::string path2 = dir + "/b.ckpt";

    save_checkpoint(path1, net, desc, 123);
    LoadedCheckpoint loaded = load_checkpoint(path1);
    CHECK(loaded.seed == 123);
    CHECK(loaded.schedule.steps == 80);
    CHECK(loaded.net->config().hidden == config.hidden);

    save_checkpoint(path2, *loaded.net, loaded.schedule, loaded.seed);
    std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2); // bit-exact round trip

    Rng rng(56);
    Tensor v = random_tensor(config.video_shape, rng);
    Tensor a = random_tensor(config.audio_shape, rng);
    DenoiserOutput reloaded_out = loaded.net->predict(v, a, 11);
    LoadedCheckpoint again = load_checkpoint(path2);
    DenoiserOutput again_out = again.net->predict(v, a, 11);
    for (std::size_t i = 0; i < reloaded_out.v_video.size(); ++i) {
        CHECK(reloaded_out.v_video[i] == again_out.v_video[i]);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("denoiser rejects bad inputs and gradients are gated") {
    GaussianWorld world = identity_world(2);
    NoiseSchedule sched = cosine_schedule(10, 0.008);
    AnalyticGaussianDenoiser model(world, {1, 1, 1, 1}, {1, 1}, sched);

    Tensor v({1, 1, 1, 1});
    Tensor a({1, 1});
    CHECK_THROWS_AS(model.predict(v, a, 0), std::invalid_argument);
    CHECK_THROWS_AS(model.predict(v, a, 11), std::invalid_argument);
    CHECK_THROWS_AS(model.predict(Tensor({2, 1, 1, 1}), a, 5), std::invalid_argument);
    CHECK(model.supports_input_gradient());
}
