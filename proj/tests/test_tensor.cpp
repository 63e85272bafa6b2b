#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "cmmd/rng.hpp"
#include "cmmd/tensor.hpp"

using namespace cmmd;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.normal();
    }
    return t;
}

} // namespace

TEST_CASE("rng determinism and streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(42), d(43);
    CHECK(c.next_u64() != d.next_u64());

    Rng base(7);
    Rng s0 = base.stream(0);
    Rng s1 = base.stream(1);
    CHECK(s0.next_u64() != s1.next_u64());
    Rng s0_again = base.stream(0);
    CHECK(base.stream(0).next_u64() == s0_again.next_u64());
}

TEST_CASE("rng normal moments") {
    Rng rng(123);
    double sum = 0.0, sum_sq = 0.0;
    const int count = 200000;
    for (int i = 0; i < count; ++i) {
        double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    double mean = sum / count;
    double var = sum_sq / count - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("nn_resample_time identity when lengths match") {
    Rng rng(1);
    Tensor x = random_tensor({4, 3}, rng);
    Tensor y = nn_resample_time(x, 4);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(y[i] == x[i]);
    }
}

TEST_CASE("nn_resample_time duplicates rows on upsampling") {
    Tensor x({2, 1}, {10.0, 20.0});
    Tensor y = nn_resample_time(x, 4);
    CHECK(y.at2(0, 0) == 10.0);
    CHECK(y.at2(1, 0) == 10.0);
    CHECK(y.at2(2, 0) == 20.0);
    CHECK(y.at2(3, 0) == 20.0);
}

TEST_CASE("nn_resample_time down-up keeps values from the input") {
    // brute-force index check over all positions: every output row of a
    // 112 -> 18 -> 112 round trip must equal some input row
    Tensor x({112, 2});
    for (std::size_t t = 0; t < 112; ++t) {
        x.at2(t, 0) = static_cast<double>(t);
        x.at2(t, 1) = 1000.0 + static_cast<double>(t);
    }
    Tensor down = nn_resample_time(x, 18);
    Tensor up = nn_resample_time(down, 112);
    for (std::size_t t = 0; t < 112; ++t) {
        double row_id = up.at2(t, 0);
        CHECK(row_id >= 0.0);
        CHECK(row_id <= 111.0);
        CHECK(row_id == std::floor(row_id));
        CHECK(up.at2(t, 1) == 1000.0 + row_id); // rows stay intact
    }
}

TEST_CASE("nn_resample_time rejects empty targets") {
    Tensor x({2, 1}, {1.0, 2.0});
    CHECK_THROWS_AS(nn_resample_time(x, 0), std::invalid_argument);
}

TEST_CASE("spatial_mean_pool constant and hand case") {
    Tensor constant = Tensor::full({3, 2, 4, 4}, 3.0);
    Tensor pooled = spatial_mean_pool(constant);
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        CHECK(pooled[i] == doctest::Approx(3.0));
    }

    Tensor v({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(spatial_mean_pool(v).at2(0, 0) == doctest::Approx(2.5));
}

TEST_CASE("spatial_mean_pool matches brute-force summation") {
    Rng rng(5);
    Tensor v = random_tensor({4, 3, 5, 7}, rng);
    Tensor pooled = spatial_mean_pool(v);
    for (std::size_t f = 0; f < 4; ++f) {
        for (std::size_t c = 0; c < 3; ++c) {
            double sum = 0.0;
            for (std::size_t h = 0; h < 5; ++h) {
                for (std::size_t w = 0; w < 7; ++w) {
                    sum += v.at4(f, c, h, w);
                }
            }
            CHECK(pooled.at2(f, c) == doctest::Approx(sum / 35.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("broadcast_spatial fills planes and round-trips through pooling") {
    Tensor feat({1, 1}, {7.0});
    Tensor plane = broadcast_spatial(feat, 2, 2);
    for (std::size_t i = 0; i < plane.size(); ++i) {
        CHECK(plane[i] == 7.0);
    }

    Rng rng(9);
    Tensor features = random_tensor({5, 3}, rng);
    Tensor video = broadcast_spatial(features, 4, 6);
    Tensor back = spatial_mean_pool(video);
    for (std::size_t i = 0; i < features.size(); ++i) {
        CHECK(back[i] == doctest::Approx(features[i]).epsilon(1e-14));
    }

    // summation oracle: sum over spatial dims equals feat * H * W
    for (std::size_t f = 0; f < 5; ++f) {
        for (std::size_t c = 0; c < 3; ++c) {
            double sum = 0.0;
            for (std::size_t h = 0; h < 4; ++h) {
                for (std::size_t w = 0; w < 6; ++w) {
                    sum += video.at4(f, c, h, w);
                }
            }
            CHECK(sum == doctest::Approx(features.at2(f, c) * 24.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("concat_channels shapes and slicing identity") {
    Rng rng(11);
    Tensor a = random_tensor({18, 4, 16, 16}, rng);
    Tensor b = random_tensor({18, 80, 16, 16}, rng);
    Tensor joined = concat_channels(a, b);
    CHECK(joined.shape() == std::vector<std::size_t>{18, 84, 16, 16});

    Tensor a2 = random_tensor({112, 80}, rng);
    Tensor b2 = random_tensor({112, 4}, rng);
    CHECK(concat_channels(a2, b2).shape() == std::vector<std::size_t>{112, 84});

    Tensor front = slice_channels(joined, 0, 4);
    Tensor rear = slice_channels(joined, 4, 80);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(front[i] == a[i]);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(rear[i] == b[i]);
    }

    Tensor bad({17, 4, 16, 16});
    CHECK_THROWS_AS(concat_channels(a, bad), std::invalid_argument);
}

TEST_CASE("concat_channels associative in shape") {
    Rng rng(13);
    Tensor a = random_tensor({3, 2, 2, 2}, rng);
    Tensor b = random_tensor({3, 3, 2, 2}, rng);
    Tensor c = random_tensor({3, 4, 2, 2}, rng);
    Tensor left = concat_channels(concat_channels(a, b), c);
    Tensor right = concat_channels(a, concat_channels(b, c));
    CHECK(left.shape() == right.shape());
    for (std::size_t i = 0; i < left.size(); ++i) {
        CHECK(left[i] == right[i]);
    }
}

TEST_CASE("nn_resample_time output values form a subset of input values") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t src = 1 + rng.index(40);
        std::size_t dst = 1 + rng.index(40);
        Tensor x = random_tensor({src, 2}, rng);
        std::set<double> values(x.data().begin(), x.data().end());
        Tensor y = nn_resample_time(x, dst);
        for (double v : y.data()) {
            CHECK(values.count(v) == 1);
        }
    }
}

TEST_CASE("tensor dump format round trip") {
    Rng rng(23);
    Tensor t = random_tensor({3, 4, 5}, rng);
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(buf, t);

    std::string bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "CMDT");
    // magic(4) + version(2) + rank(1) + dims(12) + payload(60*4)
    CHECK(bytes.size() == 4 + 2 + 1 + 12 + t.size() * 4);

    Tensor back = read_tensor(buf);
    CHECK(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(back[i] == doctest::Approx(t[i]).epsilon(1e-6)); // f32 payload
        CHECK(back[i] == static_cast<double>(static_cast<float>(t[i])));
    }

    // second dump of the loaded tensor is byte-identical
    std::stringstream buf2(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(buf2, back);
    std::stringstream buf3(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(buf3, read_tensor(buf2));
    CHECK(buf2.str() == buf3.str());
}

TEST_CASE("tensor dump rejects corrupt headers") {
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    buf << "NOPE";
    CHECK_THROWS_AS(read_tensor(buf), std::runtime_error);
}
