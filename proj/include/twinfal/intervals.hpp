#pragma once

#include <cstdint>
#include <vector>

namespace twinfal {

// Which one-sided endpoint is being built. For the H_lo test the bound side
// needs a lower endpoint for Q_lo and the twin side an upper endpoint for the
// twin mean; the H_up test uses the mirrored pair.
enum class IntervalSide { LowerForBound, UpperForTwin, UpperForBound, LowerForTwin };

inline bool is_lower_side(IntervalSide s) {
    return s == IntervalSide::LowerForBound || s == IntervalSide::LowerForTwin;
}

enum class IntervalBackend { Hoeffding, BootstrapReversePercentile, BootstrapPercentile };

struct IntervalRequest {
    std::vector<double> values;  // the i.i.d. sample
    double y_lo = 0.0;           // range the values are bounded in (Hoeffding)
    double y_up = 1.0;
    double alpha = 0.05;
    IntervalSide side = IntervalSide::LowerForBound;
    IntervalBackend backend = IntervalBackend::Hoeffding;
    int resamples = 100;
    std::uint64_t seed = 0;
};

struct IntervalResult {
    double endpoint = 0.0;
    std::size_t n = 0;
    IntervalBackend backend = IntervalBackend::Hoeffding;
    bool nested = true;  // endpoints move monotonically in alpha for every backend here
};

// Delta = (y_up - y_lo) * sqrt(log(2/alpha) / (2n)).
double hoeffding_delta(double y_lo, double y_up, double alpha, std::size_t n);

// mean -/+ Delta depending on side. Endpoints are deliberately not clamped to
// [y_lo, y_up]; the closed-form p-value inverts them exactly.
IntervalResult hoeffding_endpoint(const IntervalRequest& req);

// Seeded uniform-with-replacement resample means; nearest-rank quantiles.
// Reverse percentile: endpoint = 2*mean - Delta with Delta the (1 - alpha/2)
// resample-mean quantile for lower endpoints and the alpha/2 quantile for
// upper ones. Percentile: the matching-side quantile itself.
IntervalResult bootstrap_endpoint(const IntervalRequest& req);

IntervalResult interval_endpoint(const IntervalRequest& req);

// The resample means only depend on (values, resamples, seed); the testing
// module computes them once per side and scans the alpha grid over them.
std::vector<double> bootstrap_resample_means(const std::vector<double>& values, int resamples,
                                             std::uint64_t seed);

double bootstrap_endpoint_from_means(const std::vector<double>& sorted_means, double sample_mean,
                                     double alpha, IntervalSide side, IntervalBackend backend);

}  // namespace twinfal
