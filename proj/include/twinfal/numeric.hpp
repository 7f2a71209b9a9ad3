#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace twinfal {

// Kahan compensated accumulator. Bound estimates promise the width identity to
// 1e-12 absolute at n up to 1e7; plain summation does not keep that honest.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - compensation_;
        const double t = sum_ + y;
        compensation_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

inline double kahan_mean(const std::vector<double>& values) {
    KahanSum s;
    for (double v : values) s.add(v);
    return s.value() / static_cast<double>(values.size());
}

// 17 significant digits: finite doubles round-trip bit-exactly through text.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Nearest-rank quantile: element at 1-based rank ceil(q * n) of the ascending
// sort. No interpolation, order-statistic exact.
double quantile_nearest_rank(std::vector<double> values, double q);

}  // namespace twinfal
