#include "twinfal/intervals.hpp"

#include <algorithm>
#include <cmath>

#include "twinfal/error.hpp"
#include "twinfal/numeric.hpp"
#include "twinfal/rng.hpp"

namespace twinfal {

double hoeffding_delta(double y_lo, double y_up, double alpha, std::size_t n) {
    return (y_up - y_lo) * std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

namespace {

void check_common(const IntervalRequest& req) {
    if (req.values.empty()) throw ValidationError("confidence interval on an empty sample");
    if (!(req.alpha > 0.0 && req.alpha < 1.0)) {
        throw ValidationError("alpha must lie strictly inside (0, 1)");
    }
}

}  // namespace

IntervalResult hoeffding_endpoint(const IntervalRequest& req) {
    check_common(req);
    if (!(req.y_lo <= req.y_up)) throw ValidationError("invalid range for Hoeffding interval");
    for (double v : req.values) {
        if (v < req.y_lo || v > req.y_up) {
            throw ValidationError("Hoeffding interval requires values inside [y_lo, y_up]");
        }
    }
    const double mean = kahan_mean(req.values);
    const double delta = hoeffding_delta(req.y_lo, req.y_up, req.alpha, req.values.size());
    IntervalResult res;
    res.endpoint = is_lower_side(req.side) ? mean - delta : mean + delta;
    res.n = req.values.size();
    res.backend = IntervalBackend::Hoeffding;
    return res;
}

std::vector<double> bootstrap_resample_means(const std::vector<double>& values, int resamples,
                                             std::uint64_t seed) {
    if (values.empty()) throw ValidationError("bootstrap on an empty sample");
    if (resamples < 1) throw ValidationError("bootstrap needs at least one resample");
    const auto n = static_cast<std::uint64_t>(values.size());
    CounterRng rng(seed);
    std::vector<double> means;
    means.reserve(resamples);
    for (int r = 0; r < resamples; ++r) {
        KahanSum sum;
        for (std::uint64_t i = 0; i < n; ++i) sum.add(values[rng.next_below(n)]);
        means.push_back(sum.value() / static_cast<double>(n));
    }
    return means;
}

double bootstrap_endpoint_from_means(const std::vector<double>& sorted_means, double sample_mean,
                                     double alpha, IntervalSide side, IntervalBackend backend) {
    const auto r = static_cast<double>(sorted_means.size());
    auto quantile_at = [&](double q) {
        auto rank = static_cast<std::size_t>(std::ceil(q * r));
        rank = std::clamp<std::size_t>(rank, 1, sorted_means.size());
        return sorted_means[rank - 1];
    };
    if (backend == IntervalBackend::BootstrapReversePercentile) {
        const double q = is_lower_side(side) ? 1.0 - alpha / 2.0 : alpha / 2.0;
        return 2.0 * sample_mean - quantile_at(q);
    }
    const double q = is_lower_side(side) ? alpha / 2.0 : 1.0 - alpha / 2.0;
    return quantile_at(q);
}

IntervalResult bootstrap_endpoint(const IntervalRequest& req) {
    check_common(req);
    if (req.backend == IntervalBackend::Hoeffding) {
        throw ValidationError("bootstrap_endpoint called with the Hoeffding backend");
    }
    std::vector<double> means = bootstrap_resample_means(req.values, req.resamples, req.seed);
    std::sort(means.begin(), means.end());
    IntervalResult res;
    res.endpoint = bootstrap_endpoint_from_means(means, kahan_mean(req.values), req.alpha, req.side,
                                                 req.backend);
    res.n = req.values.size();
    res.backend = req.backend;
    return res;
}

IntervalResult interval_endpoint(const IntervalRequest& req) {
    return req.backend == IntervalBackend::Hoeffding ? hoeffding_endpoint(req)
                                                     : bootstrap_endpoint(req);
}

}  // namespace twinfal
