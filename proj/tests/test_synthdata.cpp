#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "cmmd/negatives.hpp"
#include "cmmd/synthdata.hpp"

using namespace cmmd;

TEST_CASE("gaussian pairs: identity world statistics at 10k samples") {
    GaussianWorld world = identity_world(6);
    auto pairs = gaussian_pairs(world, 10000, {1, 1, 1, 3}, {3, 1}, 42);
    REQUIRE(pairs.size() == 10000);

    std::vector<double> mean(6, 0.0), second(6, 0.0);
    for (const auto& pair : pairs) {
        for (std::size_t i = 0; i < 3; ++i) {
            mean[i] += pair.video[i];
            second[i] += pair.video[i] * pair.video[i];
            mean[3 + i] += pair.audio[i];
            second[3 + i] += pair.audio[i] * pair.audio[i];
        }
    }
    for (std::size_t i = 0; i < 6; ++i) {
        mean[i] /= 10000.0;
        double var = second[i] / 10000.0 - mean[i] * mean[i];
        CHECK(std::abs(mean[i]) < 0.05);
        CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("gaussian pairs are bit-reproducible under the same seed") {
    GaussianWorld world = block_world(2, 2, 0.5);
    auto a = gaussian_pairs(world, 20, {1, 1, 1, 2}, {2, 1}, 9);
    auto b = gaussian_pairs(world, 20, {1, 1, 1, 2}, {2, 1}, 9);
    for (std::size_t i = 0; i < 20; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(a[i].video[j] == b[i].video[j]);
            CHECK(a[i].audio[j] == b[i].audio[j]);
        }
    }
}

TEST_CASE("gaussian pairs: block correlation matches rho") {
    GaussianWorld world = block_world(4, 4, 0.9);
    auto pairs = gaussian_pairs(world, 20000, {1, 1, 2, 2}, {4, 1}, 3);
    double cross = 0.0, var_v = 0.0, var_a = 0.0;
    for (const auto& pair : pairs) {
        for (std::size_t i = 0; i < 4; ++i) {
            cross += pair.video[i] * pair.audio[i];
            var_v += pair.video[i] * pair.video[i];
            var_a += pair.audio[i] * pair.audio[i];
        }
    }
    double corr = cross / std::sqrt(var_v * var_a);
    CHECK(corr == doctest::Approx(0.9).epsilon(0.022));
}

TEST_CASE("gaussian pairs reject mismatched shapes") {
    GaussianWorld world = identity_world(6);
    CHECK_THROWS_AS(gaussian_pairs(world, 2, {1, 1, 1, 2}, {3, 1}, 0),
                    std::invalid_argument);
}

TEST_CASE("event pairs: clean construction exposes exactly the event positions") {
    EventDatasetConfig config;
    config.num_items = 10;
    config.events_per_clip = 1;
    config.noise_level = 0.0;
    config.amplitude = 2.0;
    config.seed = 5;
    auto items = event_pairs(config);
    REQUIRE(items.size() == 10);

    for (const auto& item : items) {
        REQUIRE(item.event_frames.size() == 1);
        std::size_t event = item.event_frames[0];

        // exactly one frame and its mapped audio columns exceed half amplitude
        Tensor pooled = spatial_mean_pool(item.pair.video);
        for (std::size_t f = 0; f < config.frames; ++f) {
            double value = pooled.at2(f, 0);
            if (f == event) {
                CHECK(value > config.amplitude / 2.0);
            } else {
                CHECK(value < config.amplitude / 2.0);
            }
        }
        auto steps = event_audio_steps(event, config.frames, config.steps);
        CHECK_FALSE(steps.empty());
        for (std::size_t t = 0; t < config.steps; ++t) {
            bool mapped = nn_index(t, config.frames, config.steps) == event;
            double value = item.pair.audio.at2(t, 0);
            if (mapped) {
                CHECK(value > config.amplitude / 2.0);
            } else {
                CHECK(value < config.amplitude / 2.0);
            }
        }
    }
}

TEST_CASE("event pairs enforce minimum spacing and reject impossible configs") {
    EventDatasetConfig config;
    config.num_items = 50;
    config.events_per_clip = 3;
    config.seed = 6;
    auto items = event_pairs(config);
    for (const auto& item : items) {
        for (std::size_t i = 1; i < item.event_frames.size(); ++i) {
            CHECK(item.event_frames[i] - item.event_frames[i - 1] >= 2);
        }
    }

    EventDatasetConfig bad;
    bad.frames = 4;
    bad.events_per_clip = 3; // needs 2*3-1 = 5 frames
    CHECK_THROWS_AS(event_pairs(bad), std::invalid_argument);
}

TEST_CASE("alignment score: clean pair scores 1, pure-noise audio scores 0") {
    EventDatasetConfig config;
    config.num_items = 5;
    config.events_per_clip = 2;
    config.noise_level = 0.0;
    config.seed = 7;
    auto items = event_pairs(config);
    for (const auto& item : items) {
        auto score = alignment_score(item.pair.video, item.pair.audio, 1.0);
        REQUIRE(score.has_value());
        CHECK(*score == doctest::Approx(1.0));
    }

    // replace audio with noise: no aligned events
    Rng rng(8);
    Tensor noise(items[0].pair.audio.shape());
    for (std::size_t i = 0; i < noise.size(); ++i) {
        noise[i] = 0.05 * rng.normal();
    }
    auto score = alignment_score(items[0].pair.video, noise, 1.0);
    double value = score ? *score : 0.0;
    CHECK(value == doctest::Approx(0.0));
}

TEST_CASE("alignment score: hand-built pair with 2 of 3 events aligned") {
    EventDatasetConfig config;
    config.frames = 18;
    config.steps = 112;
    config.video_channels = 1;
    config.audio_channels = 2;
    config.height = 4;
    config.width = 4;

    Tensor video({18, 1, 4, 4});
    Tensor audio({112, 2});
    auto add_video_event = [&](std::size_t f) {
        for (std::size_t i = 0; i < 16; ++i) {
            video.data()[(f * 1 + 0) * 16 + i] += 3.0;
        }
    };
    auto add_audio_event = [&](std::size_t f) {
        for (std::size_t t : event_audio_steps(f, 18, 112)) {
            audio.at2(t, 0) += 3.0;
            audio.at2(t, 1) += 3.0;
        }
    };
    add_video_event(3);
    add_video_event(9);
    add_video_event(15);
    add_audio_event(3);
    add_audio_event(9);
    // third audio event deliberately far from frame 15
    add_audio_event(6);

    auto score = alignment_score(video, audio, 1.0);
    REQUIRE(score.has_value());
    CHECK(*score == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("alignment score is undefined without video events") {
    Tensor video({6, 1, 2, 2});   // all zeros, no events
    Tensor audio({20, 2});
    auto score = alignment_score(video, audio, 1.0);
    CHECK_FALSE(score.has_value());
}

TEST_CASE("shift negatives score strictly below positives across a 100-item sweep") {
    EventDatasetConfig config;
    config.num_items = 100;
    config.events_per_clip = 2;
    config.amplitude = 3.0;
    config.noise_level = 0.5; // below amplitude/4
    config.seed = 9;
    auto items = event_pairs(config);

    long audio_shift = 3 * 112 / 18; // three frames of audio steps
    for (const auto& item : items) {
        auto positive = alignment_score(item.pair.video, item.pair.audio, 1.0);
        REQUIRE(positive.has_value());
        Tensor shifted = negative_temporal_shift(item.pair.audio, audio_shift);
        auto negative = alignment_score(item.pair.video, shifted, 1.0);
        double neg = negative ? *negative : 0.0;
        CHECK(*positive > neg);
    }
}

TEST_CASE("dataset directory round trip preserves items and labels") {
    EventDatasetConfig config;
    config.num_items = 6;
    config.events_per_clip = 2;
    config.seed = 10;
    auto items = event_pairs(config);

    std::string dir = (std::filesystem::temp_directory_path() / "cmmd_ds_test").string();
    std::filesystem::remove_all(dir);
    save_dataset(dir, items);
    StoredDataset loaded = load_dataset(dir);
    REQUIRE(loaded.items.size() == 6);
    CHECK(loaded.kind == "event");
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(loaded.event_frames[i] == items[i].event_frames);
        CHECK(loaded.items[i].video.shape() == items[i].pair.video.shape());
        for (std::size_t j = 0; j < loaded.items[i].video.size(); ++j) {
            // storage is f32
            CHECK(loaded.items[i].video[j] ==
                  static_cast<double>(static_cast<float>(items[i].pair.video[j])));
        }
    }
    std::filesystem::remove_all(dir);
}
