#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "twinfal/rng.hpp"

using namespace twinfal;

TEST_CASE("counter rng is a pure function of key and counter") {
    CounterRng a(derive_key({42, 7}));
    CounterRng b(derive_key({42, 7}));
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    CounterRng c(derive_key({42, 8}));
    bool any_diff = false;
    CounterRng a2(derive_key({42, 7}));
    for (int i = 0; i < 10; ++i) any_diff |= a2.next_u64() != c.next_u64();
    CHECK(any_diff);
}

TEST_CASE("derive_key is order sensitive") {
    CHECK(derive_key({1, 2}) != derive_key({2, 1}));
    CHECK(derive_key({1}) != derive_key({1, 0}));
}

TEST_CASE("next_unit stays in [0,1) and looks uniform") {
    CounterRng rng(123);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.next_unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("next_below respects the bound and hits every value") {
    CounterRng rng(99);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.next_below(7);
        REQUIRE(v < 7);
        ++counts[static_cast<int>(v)];
    }
    for (int c : counts) CHECK(c > 700);
}

TEST_CASE("next_normal has roughly standard moments") {
    CounterRng rng(7);
    double sum = 0.0, sumsq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_normal();
        sum += z;
        sumsq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("wire seeds fit in 53 bits and depend on the request id") {
    const auto s0 = wire_seed(1234, 0);
    const auto s1 = wire_seed(1234, 1);
    CHECK(s0 != s1);
    CHECK(s0 <= kWireSeedMask);
    CHECK(s1 <= kWireSeedMask);
    CHECK(wire_seed(1234, 0) == s0);
}
