#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "cmmd/forward.hpp"
#include "cmmd/rng.hpp"
#include "cmmd/schedule.hpp"

using namespace cmmd;

namespace {

// Independent evaluation of the closed form, kept deliberately separate
// from the implementation.
double cosine_abar_reference(std::size_t n, std::size_t total, double s) {
    auto f = [&](double v) {
        double c = std::cos((v / static_cast<double>(total) + s) / (1.0 + s) *
                            std::numbers::pi / 2.0);
        return c * c;
    };
    return f(static_cast<double>(n)) / f(0.0);
}

} // namespace

TEST_CASE("cosine schedule boundary and shape") {
    NoiseSchedule sched = cosine_schedule(1000, 0.008);
    CHECK(sched.alpha_bar(0) == 1.0);
    for (std::size_t n = 1; n <= 1000; ++n) {
        CHECK(sched.alpha_bar(n) < sched.alpha_bar(n - 1));
        CHECK(sched.alpha_bar(n) > 0.0);
        CHECK(sched.alpha_bar(n) <= 1.0);
    }
    CHECK(sched.alpha_bar(1000) < 1e-3);
}

TEST_CASE("cosine schedule matches an independent formula evaluation") {
    NoiseSchedule sched = cosine_schedule(1000, 0.008);
    CHECK(sched.alpha_bar(500) ==
          doctest::Approx(cosine_abar_reference(500, 1000, 0.008)).epsilon(1e-14));
    CHECK(sched.alpha_bar(117) ==
          doctest::Approx(cosine_abar_reference(117, 1000, 0.008)).epsilon(1e-14));
}

TEST_CASE("cosine schedule determinism and definitional identity") {
    NoiseSchedule a = cosine_schedule(1000, 0.008);
    NoiseSchedule b = cosine_schedule(1000, 0.008);
    CHECK(a.alpha_bars() == b.alpha_bars()); // bit-identical

    for (std::size_t n = 0; n <= 1000; n += 97) {
        double abar = a.alpha_bar(n);
        double lhs = std::sqrt(abar) * std::sqrt(abar) +
                     std::sqrt(1.0 - abar) * std::sqrt(1.0 - abar);
        CHECK(std::abs(lhs - 1.0) < 1e-12);
    }
}

TEST_CASE("cosine schedule rejects bad arguments") {
    CHECK_THROWS_AS(cosine_schedule(0, 0.008), std::invalid_argument);
    CHECK_THROWS_AS(cosine_schedule(10, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(cosine_schedule(10, -1.0), std::invalid_argument);
}

TEST_CASE("velocity boundary cases") {
    Tensor x0({3}, {1.0, -2.0, 0.5});
    Tensor eps({3}, {0.3, 0.1, -0.7});

    Tensor v1 = velocity(x0, eps, 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(v1[i] == eps[i]);
    }

    Tensor zero({3});
    Tensor v2 = velocity(zero, eps, 0.7);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(v2[i] == doctest::Approx(std::sqrt(0.7) * eps[i]).epsilon(1e-15));
    }

    Tensor x0s({1}, {2.0});
    Tensor eps0({1}, {0.0});
    CHECK(velocity(x0s, eps0, 0.5)[0] == doctest::Approx(-std::sqrt(0.5) * 2.0));
}

TEST_CASE("x0_from_v and eps_from_v boundary cases") {
    Tensor x_n({2}, {1.5, -0.25});
    Tensor v({2}, {0.4, 0.9});

    Tensor x0 = x0_from_v(x_n, v, 1.0);
    CHECK(x0[0] == x_n[0]);
    CHECK(x0[1] == x_n[1]);

    Tensor zero({2});
    Tensor half = x0_from_v(x_n, zero, 0.25);
    CHECK(half[0] == doctest::Approx(0.5 * x_n[0]));
    CHECK(half[1] == doctest::Approx(0.5 * x_n[1]));

    CHECK(eps_from_v(x_n, v, 1.0)[0] == v[0]);
    CHECK(eps_from_v(x_n, v, 0.0)[0] == x_n[0]);
}

TEST_CASE("velocity algebra round trips to 1e-12 over 1000 random triples") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t dim = 1 + rng.index(8);
        Tensor x0({dim});
        Tensor eps({dim});
        for (std::size_t i = 0; i < dim; ++i) {
            x0[i] = 3.0 * rng.normal();
            eps[i] = rng.normal();
        }
        double abar = 1e-6 + (1.0 - 2e-6) * rng.uniform();

        Tensor x_n = diffuse(x0, eps, abar);
        Tensor v = velocity(x0, eps, abar);
        Tensor x0_rec = x0_from_v(x_n, v, abar);
        Tensor eps_rec = eps_from_v(x_n, v, abar);
        for (std::size_t i = 0; i < dim; ++i) {
            CHECK(std::abs(x0_rec[i] - x0[i]) < 1e-12);
            CHECK(std::abs(eps_rec[i] - eps[i]) < 1e-12);
        }
    }
}

TEST_CASE("shape mismatches are rejected") {
    Tensor a({2});
    Tensor b({3});
    CHECK_THROWS_AS(velocity(a, b, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(x0_from_v(a, b, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(eps_from_v(a, b, 0.5), std::invalid_argument);
}
