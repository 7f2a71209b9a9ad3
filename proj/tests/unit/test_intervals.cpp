#include <doctest.h>

#include <cmath>
#include <vector>

#include "twinfal/intervals.hpp"
#include "twinfal/error.hpp"
#include "twinfal/rng.hpp"

using namespace twinfal;

namespace {

IntervalRequest base_request(std::vector<double> values) {
    IntervalRequest req;
    req.values = std::move(values);
    req.y_lo = 0.0;
    req.y_up = 1.0;
    req.alpha = 0.05;
    return req;
}

std::vector<double> constant_sample(std::size_t n, double c) {
    return std::vector<double>(n, c);
}

}  // namespace

TEST_CASE("hoeffding endpoint matches the closed form") {
    // n = 200 values with mean 0.6 on range (0,1), alpha = 0.05:
    // Delta = sqrt(ln(40)/400) = 0.09603227935457884.
    std::vector<double> values;
    for (int i = 0; i < 100; ++i) {
        values.push_back(0.5);
        values.push_back(0.7);
    }
    auto req = base_request(values);
    req.side = IntervalSide::LowerForBound;
    const auto res = hoeffding_endpoint(req);
    const double delta = std::sqrt(std::log(40.0) / 400.0);
    CHECK(delta == doctest::Approx(0.09603227913199208).epsilon(1e-14));
    CHECK(res.endpoint == doctest::Approx(0.6 - delta).epsilon(1e-14));
    CHECK(res.n == 200);

    req.side = IntervalSide::UpperForTwin;
    CHECK(hoeffding_endpoint(req).endpoint == doctest::Approx(0.6 + delta).epsilon(1e-14));
    req.side = IntervalSide::UpperForBound;
    CHECK(hoeffding_endpoint(req).endpoint == doctest::Approx(0.6 + delta).epsilon(1e-14));
    req.side = IntervalSide::LowerForTwin;
    CHECK(hoeffding_endpoint(req).endpoint == doctest::Approx(0.6 - delta).epsilon(1e-14));
}

TEST_CASE("hoeffding delta stays positive as alpha approaches 1") {
    // Delta -> range * sqrt(log(2)/(2n)) > 0, strictly inside mean +/- range.
    const double delta = hoeffding_delta(0.0, 1.0, 0.999999, 5);
    CHECK(delta > 0.0);
    CHECK(delta < 1.0);
}

TEST_CASE("hoeffding n=1 endpoint is not clamped") {
    auto req = base_request({0.4});
    req.side = IntervalSide::LowerForBound;
    const auto res = hoeffding_endpoint(req);
    const double delta = std::sqrt(std::log(40.0) / 2.0);
    CHECK(delta == doctest::Approx(1.3581015157406195).epsilon(1e-14));
    CHECK(res.endpoint == doctest::Approx(0.4 - delta).epsilon(1e-12));
    CHECK(res.endpoint < 0.0);  // escapes [y_lo, y_up]; inversion needs the raw value
}

TEST_CASE("hoeffding rejects out-of-range values and empty samples") {
    auto req = base_request({1.5});
    CHECK_THROWS_AS(hoeffding_endpoint(req), ValidationError);
    req.values.clear();
    CHECK_THROWS_AS(hoeffding_endpoint(req), ValidationError);
}

TEST_CASE("bootstrap on a constant sample returns the constant for all backends/sides") {
    for (auto backend :
         {IntervalBackend::BootstrapReversePercentile, IntervalBackend::BootstrapPercentile}) {
        for (auto side : {IntervalSide::LowerForBound, IntervalSide::UpperForTwin,
                          IntervalSide::UpperForBound, IntervalSide::LowerForTwin}) {
            auto req = base_request(constant_sample(37, 0.42));
            req.backend = backend;
            req.side = side;
            req.seed = 99;
            CHECK(bootstrap_endpoint(req).endpoint == 0.42);
        }
    }
}

TEST_CASE("bootstrap endpoints are deterministic given the seed") {
    CounterRng rng(1);
    std::vector<double> values;
    for (int i = 0; i < 500; ++i) values.push_back(rng.next_unit());
    auto req = base_request(values);
    req.backend = IntervalBackend::BootstrapReversePercentile;
    req.side = IntervalSide::LowerForBound;
    req.seed = 1234;
    const double e1 = bootstrap_endpoint(req).endpoint;
    const double e2 = bootstrap_endpoint(req).endpoint;
    CHECK(e1 == e2);
    req.seed = 1235;
    CHECK(bootstrap_endpoint(req).endpoint != e1);
}

TEST_CASE("default resample count follows the reference configuration") {
    CHECK(IntervalRequest{}.resamples == 100);
}

TEST_CASE("endpoints are nested in alpha") {
    CounterRng rng(2);
    std::vector<double> values;
    for (int i = 0; i < 400; ++i) values.push_back(rng.next_unit());

    const std::vector<double> alphas{0.001, 0.01, 0.05, 0.1, 0.3, 0.6, 0.9};
    for (auto backend : {IntervalBackend::Hoeffding, IntervalBackend::BootstrapReversePercentile,
                         IntervalBackend::BootstrapPercentile}) {
        for (auto side : {IntervalSide::LowerForBound, IntervalSide::UpperForTwin,
                          IntervalSide::UpperForBound, IntervalSide::LowerForTwin}) {
            double prev = is_lower_side(side) ? -1e300 : 1e300;
            for (double alpha : alphas) {
                auto req = base_request(values);
                req.alpha = alpha;
                req.side = side;
                req.backend = backend;
                req.seed = 7;
                const double e = interval_endpoint(req).endpoint;
                if (is_lower_side(side)) {
                    CHECK(e >= prev);  // lower endpoints rise with alpha
                } else {
                    CHECK(e <= prev);  // upper endpoints fall with alpha
                }
                prev = e;
            }
        }
    }
}

TEST_CASE("hoeffding one-sided coverage meets its guarantee") {
    // 2000 replicates of n=60 bounded samples with true mean 0.5; the lower
    // endpoint must undershoot the mean in at least a 1 - alpha/2 fraction.
    const double alpha = 0.2;
    int covered = 0;
    const int replicates = 2000;
    for (int r = 0; r < replicates; ++r) {
        CounterRng rng(derive_key({static_cast<std::uint64_t>(r), 0xC0Full}));
        std::vector<double> values;
        for (int i = 0; i < 60; ++i) values.push_back(rng.next_unit());
        auto req = base_request(values);
        req.alpha = alpha;
        req.side = IntervalSide::LowerForBound;
        if (0.5 >= hoeffding_endpoint(req).endpoint) ++covered;
    }
    const double coverage = static_cast<double>(covered) / replicates;
    CHECK(coverage >= 1.0 - alpha / 2.0 - 0.02);
}

TEST_CASE("reverse-percentile coverage is near nominal (small replicate smoke)") {
    const double alpha = 0.05;
    int covered = 0;
    const int replicates = 300;
    for (int r = 0; r < replicates; ++r) {
        CounterRng rng(derive_key({static_cast<std::uint64_t>(r), 0xB007ull}));
        std::vector<double> values;
        for (int i = 0; i < 500; ++i) values.push_back(rng.next_unit());
        auto req = base_request(values);
        req.alpha = alpha;
        req.side = IntervalSide::LowerForBound;
        req.backend = IntervalBackend::BootstrapReversePercentile;
        req.seed = derive_key({static_cast<std::uint64_t>(r), 0x5EEDull});
        if (0.5 >= bootstrap_endpoint(req).endpoint) ++covered;
    }
    const double coverage = static_cast<double>(covered) / replicates;
    CHECK(coverage >= 0.975 - 0.05);
    CHECK(coverage <= 1.0);
}
