#include "twinfal/testing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "twinfal/error.hpp"
#include "twinfal/numeric.hpp"
#include "twinfal/rng.hpp"

namespace twinfal {

const char* gate_reason_name(GateReason r) {
    switch (r) {
        case GateReason::None: return "";
        case GateReason::NoMatchingObs: return "no matching obs trajectory";
        case GateReason::NoTwinInRegion: return "no twin trajectory in region";
        case GateReason::BootstrapMinN: return "bootstrap min-n rule";
    }
    return "";
}

std::vector<double> alpha_grid() {
    std::vector<double> grid(kAlphaGridSize);
    const double lo = std::log10(kAlphaFloor);
    for (int k = 0; k < kAlphaGridSize; ++k) {
        grid[k] = std::pow(10.0, lo * (1.0 - static_cast<double>(k) / (kAlphaGridSize - 1)));
    }
    grid.back() = 1.0;
    return grid;
}

GateReason gate_from_estimate(const BoundEstimate& est, IntervalBackend backend) {
    // A full action match inside B_{0:t} is exactly a filtered trajectory with
    // N = t, so the antecedent existence checks reduce to the counts.
    if (est.n_match == 0) return GateReason::NoMatchingObs;
    if (est.n_hat == 0) return GateReason::NoTwinInRegion;
    if (backend != IntervalBackend::Hoeffding &&
        (est.n < kBootstrapMinSamples || est.n_hat < kBootstrapMinSamples)) {
        return GateReason::BootstrapMinN;
    }
    return GateReason::None;
}

GateReason gate(const Dataset& data, const TwinDataset& twin, const Hypothesis& hyp,
                IntervalBackend backend) {
    return gate_from_estimate(estimate_bounds(data, twin, hyp), backend);
}

double p_value_hoeffding(const BoundEstimate& est, Direction direction) {
    if (est.n == 0 || est.n_hat == 0) {
        throw ValidationError("p_value on a gated estimate");
    }
    const double g =
        direction == Direction::Lo ? est.mu_lo - est.mu_hat : est.mu_hat - est.mu_up;
    if (g <= 0.0) return 1.0;
    const double c = (est.y_up - est.y_lo) * (std::sqrt(1.0 / (2.0 * static_cast<double>(est.n))) +
                                              std::sqrt(1.0 / (2.0 * static_cast<double>(est.n_hat))));
    if (c <= 0.0) return kAlphaFloor;  // degenerate range; any positive gap rejects everywhere
    const double ratio = g / c;
    return std::min(1.0, 2.0 * std::exp(-ratio * ratio));
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::vector<double> negated(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
    return out;
}

}  // namespace

double p_value_bootstrap(const std::vector<double>& bound_values,
                         const std::vector<double>& twin_values, Direction direction,
                         IntervalBackend backend, int resamples, std::uint64_t bound_seed,
                         std::uint64_t twin_seed) {
    if (bound_values.empty() || twin_values.empty()) {
        throw ValidationError("p_value on a gated estimate");
    }
    // The Up direction negates f and reuses the Lo machinery.
    const std::vector<double> b = direction == Direction::Lo ? bound_values : negated(bound_values);
    const std::vector<double> tw = direction == Direction::Lo ? twin_values : negated(twin_values);

    std::vector<double> means_b = bootstrap_resample_means(b, resamples, bound_seed);
    std::vector<double> means_t = bootstrap_resample_means(tw, resamples, twin_seed);
    std::sort(means_b.begin(), means_b.end());
    std::sort(means_t.begin(), means_t.end());
    const double mean_b = kahan_mean(b);
    const double mean_t = kahan_mean(tw);

    for (double alpha : alpha_grid()) {
        const double q_bound = bootstrap_endpoint_from_means(means_b, mean_b, alpha,
                                                             IntervalSide::LowerForBound, backend);
        const double q_twin = bootstrap_endpoint_from_means(means_t, mean_t, alpha,
                                                            IntervalSide::UpperForTwin, backend);
        if (q_twin < q_bound) return alpha;
    }
    return 1.0;
}

namespace {

struct FilteredSamples {
    std::vector<double> obs_vals;  // Y_lo or Y_up per the hypothesis direction
    std::vector<double> twin_vals;
    BoundEstimate est;
};

FilteredSamples collect_samples(const Dataset& data, const TwinDataset& twin_data,
                                const Hypothesis& hyp) {
    FilteredSamples s;
    s.est.y_lo = hyp.outcome.y_lo;
    s.est.y_up = hyp.outcome.y_up;

    KahanSum sum_lo, sum_up;
    for (const auto& c : obs_filter(data, hyp)) {
        if (!c.in_filter) continue;
        ++s.est.n;
        if (c.match_len == hyp.t) ++s.est.n_match;
        sum_lo.add(c.y_lo_value);
        sum_up.add(c.y_up_value);
        s.obs_vals.push_back(hyp.direction == Direction::Lo ? c.y_lo_value : c.y_up_value);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.est.mu_lo = s.est.n ? sum_lo.value() / static_cast<double>(s.est.n) : nan;
    s.est.mu_up = s.est.n ? sum_up.value() / static_cast<double>(s.est.n) : nan;

    if (!twin_data.records.empty() && twin_data.actions != hyp.actions) {
        throw ValidationError("twin action sequence does not match hypothesis " + hyp.id);
    }
    KahanSum sum_hat;
    for (const auto& rec : twin_data.records) {
        if (!twin_in_regions(rec, hyp)) continue;
        ++s.est.n_hat;
        const double f = hyp.outcome.value(rec.states[hyp.t - 1]);
        sum_hat.add(f);
        s.twin_vals.push_back(f);
    }
    s.est.mu_hat = s.est.n_hat ? sum_hat.value() / static_cast<double>(s.est.n_hat) : nan;
    return s;
}

const TwinDataset kEmptyTwin{};

}  // namespace

TestResult test_hypothesis(const Dataset& data, const TwinDataset* twin, const Hypothesis& hyp,
                           const TestOptions& opts) {
    const TwinDataset& twin_data = twin ? *twin : kEmptyTwin;

    TestResult res;
    res.hypothesis_id = hyp.id;
    res.outcome_feature = hyp.outcome.feature;
    res.t = hyp.t;
    res.direction = hyp.direction;
    res.q_bound = std::numeric_limits<double>::quiet_NaN();
    res.q_twin = std::numeric_limits<double>::quiet_NaN();

    // Collect the filtered samples once; both the estimate and the bootstrap
    // resampling run off these.
    FilteredSamples samples = collect_samples(data, twin_data, hyp);
    const BoundEstimate& est = samples.est;
    const std::vector<double>& obs_vals = samples.obs_vals;
    const std::vector<double>& twin_vals = samples.twin_vals;
    res.estimate = est;

    res.gate = gate_from_estimate(est, opts.backend);
    if (res.gate != GateReason::None) {
        res.p_value = 1.0;
        return res;
    }

    const std::uint64_t id_hash = fnv1a64(hyp.id);
    const std::uint64_t bound_seed = derive_key({opts.seed, id_hash, 0});
    const std::uint64_t twin_seed = derive_key({opts.seed, id_hash, 1});

    if (opts.backend == IntervalBackend::Hoeffding) {
        res.p_value = p_value_hoeffding(est, hyp.direction);
        const double delta_b = hoeffding_delta(est.y_lo, est.y_up, opts.alpha, est.n);
        const double delta_t = hoeffding_delta(est.y_lo, est.y_up, opts.alpha, est.n_hat);
        if (hyp.direction == Direction::Lo) {
            res.q_bound = est.mu_lo - delta_b;
            res.q_twin = est.mu_hat + delta_t;
        } else {
            res.q_bound = est.mu_up + delta_b;
            res.q_twin = est.mu_hat - delta_t;
        }
    } else {
        res.p_value = p_value_bootstrap(obs_vals, twin_vals, hyp.direction, opts.backend,
                                        opts.resamples, bound_seed, twin_seed);
        // Reference-level endpoints from the same resample streams, reported
        // in un-negated units.
        const bool lo = hyp.direction == Direction::Lo;
        const std::vector<double> b = lo ? obs_vals : negated(obs_vals);
        const std::vector<double> tw = lo ? twin_vals : negated(twin_vals);
        std::vector<double> means_b = bootstrap_resample_means(b, opts.resamples, bound_seed);
        std::vector<double> means_t = bootstrap_resample_means(tw, opts.resamples, twin_seed);
        std::sort(means_b.begin(), means_b.end());
        std::sort(means_t.begin(), means_t.end());
        const double q_bound = bootstrap_endpoint_from_means(
            means_b, kahan_mean(b), opts.alpha, IntervalSide::LowerForBound, opts.backend);
        const double q_twin = bootstrap_endpoint_from_means(
            means_t, kahan_mean(tw), opts.alpha, IntervalSide::UpperForTwin, opts.backend);
        res.q_bound = lo ? q_bound : -q_bound;
        res.q_twin = lo ? q_twin : -q_twin;
    }
    return res;
}

void TwinStore::add(TwinDataset twin) {
    auto actions = twin.actions;
    by_actions_[std::move(actions)] = std::move(twin);
}

const TwinDataset* TwinStore::find(const std::vector<int>& actions) const {
    auto it = by_actions_.find(actions);
    return it == by_actions_.end() ? nullptr : &it->second;
}

std::vector<TestResult> run_tests(const Dataset& data, const TwinStore& twins,
                                  const std::vector<Hypothesis>& hyps, const TestOptions& opts) {
    std::vector<TestResult> results(hyps.size());
    const int workers = std::max(1, opts.workers);
    if (workers == 1 || hyps.size() < 2) {
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            results[i] = test_hypothesis(data, twins.find(hyps[i].actions), hyps[i], opts);
        }
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= hyps.size() || failed.load()) break;
            try {
                results[i] = test_hypothesis(data, twins.find(hyps[i].actions), hyps[i], opts);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
                break;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min(static_cast<std::size_t>(workers), hyps.size());
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load()) throw ValidationError(first_error);
    return results;
}

MultiplicityReport holm_bonferroni(const std::vector<double>& p_values, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("multiplicity level must be in (0, 1)");
    const std::size_t m = p_values.size();
    MultiplicityReport report;
    report.method = MultiplicityMethod::HolmBonferroni;
    report.level = level;
    report.reject.assign(m, false);
    report.thresholds.assign(m, 0.0);
    if (m == 0) return report;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (p_values[a] != p_values[b]) return p_values[a] < p_values[b];
        return a < b;  // ties broken by index; decisions unaffected
    });

    bool stopped = false;
    for (std::size_t j = 0; j < m; ++j) {
        const double threshold = level / static_cast<double>(m - j);
        report.thresholds[order[j]] = threshold;
        if (!stopped && p_values[order[j]] <= threshold) {
            report.reject[order[j]] = true;
        } else {
            stopped = true;
        }
    }
    return report;
}

MultiplicityReport benjamini_yekutieli(const std::vector<double>& p_values, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("multiplicity level must be in (0, 1)");
    const std::size_t m = p_values.size();
    MultiplicityReport report;
    report.method = MultiplicityMethod::BenjaminiYekutieli;
    report.level = level;
    report.reject.assign(m, false);
    report.thresholds.assign(m, 0.0);
    if (m == 0) return report;

    double harmonic = 0.0;
    for (std::size_t i = 1; i <= m; ++i) harmonic += 1.0 / static_cast<double>(i);

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (p_values[a] != p_values[b]) return p_values[a] < p_values[b];
        return a < b;
    });

    std::size_t cutoff = 0;  // largest j with p_(j) <= j * level / (m * c(m))
    for (std::size_t j = 1; j <= m; ++j) {
        const double threshold =
            static_cast<double>(j) * level / (static_cast<double>(m) * harmonic);
        report.thresholds[order[j - 1]] = threshold;
        if (p_values[order[j - 1]] <= threshold) cutoff = j;
    }
    for (std::size_t j = 0; j < cutoff; ++j) report.reject[order[j]] = true;
    return report;
}

MultiplicityReport apply_multiplicity(std::vector<TestResult>& results, MultiplicityMethod method,
                                      double level) {
    std::vector<double> p;
    p.reserve(results.size());
    for (const auto& r : results) p.push_back(r.p_value);
    MultiplicityReport report = method == MultiplicityMethod::HolmBonferroni
                                    ? holm_bonferroni(p, level)
                                    : benjamini_yekutieli(p, level);
    for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].multiplicity_reject = report.reject[i];
    }
    return report;
}

SensitivityResult sensitivity_sweep(const Dataset& data, const TwinStore& twins,
                                    const std::vector<Hypothesis>& hyps,
                                    const std::vector<double>& deltas, const TestOptions& opts,
                                    MultiplicityMethod method, double level) {
    SensitivityResult sweep;
    sweep.deltas = deltas;

    std::vector<int> features;
    for (const auto& h : hyps) {
        if (std::find(features.begin(), features.end(), h.outcome.feature) == features.end()) {
            features.push_back(h.outcome.feature);
        }
    }
    std::sort(features.begin(), features.end());

    for (double delta : deltas) {
        std::vector<Hypothesis> rescaled;
        std::map<int, SensitivityCell> cells;
        for (int f : features) cells[f] = SensitivityCell{delta, f, 0, 0, 0};

        for (const auto& h : hyps) {
            Hypothesis mod = h;
            mod.outcome.y_lo = h.outcome.y_lo * (1.0 - delta / 2.0);
            mod.outcome.y_up = h.outcome.y_up * (1.0 + delta / 2.0);
            auto& cell = cells[h.outcome.feature];
            ++cell.hypotheses;
            if (!(mod.outcome.y_lo < mod.outcome.y_up)) {
                ++cell.skipped;
                continue;
            }
            rescaled.push_back(std::move(mod));
        }

        auto results = run_tests(data, twins, rescaled, opts);
        apply_multiplicity(results, method, level);
        for (const auto& r : results) {
            if (r.multiplicity_reject) ++cells[r.outcome_feature].rejections;
        }
        for (int f : features) sweep.cells.push_back(cells[f]);
    }
    return sweep;
}

namespace {

double fraction_at_least(const std::vector<double>& vals, double threshold) {
    std::size_t k = 0;
    for (double v : vals) {
        if (v >= threshold) ++k;
    }
    return static_cast<double>(k) / static_cast<double>(vals.size());
}

double fraction_above(const std::vector<double>& vals, double threshold) {
    std::size_t k = 0;
    for (double v : vals) {
        if (v > threshold) ++k;
    }
    return static_cast<double>(k) / static_cast<double>(vals.size());
}

}  // namespace

const char* two_sided_name(TwoSidedInference v) {
    switch (v) {
        case TwoSidedInference::Confirmed: return "confirmed";
        case TwoSidedInference::Falsified: return "falsified";
        case TwoSidedInference::NoInference: return "no-inference";
    }
    return "no-inference";
}

TwoSidedInference two_sided_inference(const Dataset& data, const TwinDataset* twin,
                                      const Hypothesis& hyp, const TestOptions& opts) {
    const double level = opts.alpha / 2.0;
    const FilteredSamples samples = collect_samples(data, twin ? *twin : kEmptyTwin, hyp);
    const BoundEstimate& est = samples.est;
    if (gate_from_estimate(est, opts.backend) != GateReason::None) {
        return TwoSidedInference::NoInference;
    }

    const std::uint64_t id_hash = fnv1a64(hyp.id);
    double p_falsify, p_confirm;
    if (opts.backend == IntervalBackend::Hoeffding) {
        // The confirmation test flips the gap against the same bound.
        auto closed = [&](double gap) {
            if (gap <= 0.0) return 1.0;
            const double c =
                (est.y_up - est.y_lo) * (std::sqrt(1.0 / (2.0 * static_cast<double>(est.n))) +
                                         std::sqrt(1.0 / (2.0 * static_cast<double>(est.n_hat))));
            if (c <= 0.0) return kAlphaFloor;
            const double r = gap / c;
            return std::min(1.0, 2.0 * std::exp(-r * r));
        };
        const double falsify_gap =
            hyp.direction == Direction::Lo ? est.mu_lo - est.mu_hat : est.mu_hat - est.mu_up;
        p_falsify = closed(falsify_gap);
        p_confirm = closed(-falsify_gap);
    } else {
        p_falsify = p_value_bootstrap(samples.obs_vals, samples.twin_vals, hyp.direction,
                                      opts.backend, opts.resamples, derive_key({opts.seed, id_hash, 0}),
                                      derive_key({opts.seed, id_hash, 1}));
        // Role swap tests whether the twin decisively sits on the allowed side
        // of the same bound sample.
        const bool lo = hyp.direction == Direction::Lo;
        const auto& bound_side = lo ? samples.twin_vals : samples.obs_vals;
        const auto& twin_side = lo ? samples.obs_vals : samples.twin_vals;
        p_confirm = p_value_bootstrap(bound_side, twin_side, Direction::Lo, opts.backend,
                                      opts.resamples, derive_key({opts.seed, id_hash, 2}),
                                      derive_key({opts.seed, id_hash, 3}));
    }
    if (p_falsify <= level) return TwoSidedInference::Falsified;
    if (p_confirm <= level) return TwoSidedInference::Confirmed;
    return TwoSidedInference::NoInference;
}

RejectionDiagnostics rejection_diagnostics(const Dataset& data, const TwinDataset& twin,
                                           const Hypothesis& hyp) {
    const std::vector<double> obs = obs_matched_outcomes(data, hyp);
    const std::vector<double> tw = twin_filtered_outcomes(twin, hyp);
    if (obs.empty() || tw.empty()) {
        throw ValidationError("rejection diagnostics need nonempty matched samples");
    }
    const double y_lo = hyp.outcome.y_lo;
    const double y_up = hyp.outcome.y_up;

    RejectionDiagnostics d;
    d.upper_tail_diff = fraction_at_least(tw, y_up) - fraction_at_least(obs, y_up);
    d.above_lo_diff = fraction_above(tw, y_lo) - fraction_above(obs, y_lo);

    KahanSum obs_sum, tw_sum;
    std::size_t obs_k = 0, tw_k = 0;
    for (double v : obs) {
        if (v > y_lo && v < y_up) {
            obs_sum.add(v);
            ++obs_k;
        }
    }
    for (double v : tw) {
        if (v > y_lo && v < y_up) {
            tw_sum.add(v);
            ++tw_k;
        }
    }
    d.interior_obs_defined = obs_k > 0;
    d.interior_twin_defined = tw_k > 0;
    if (d.interior_obs_defined && d.interior_twin_defined) {
        d.interior_mean_diff = tw_sum.value() / static_cast<double>(tw_k) -
                               obs_sum.value() / static_cast<double>(obs_k);
    }

    const bool up = hyp.direction == Direction::Up;
    auto points_rejected_way = [&](double diff) { return up ? diff > 0.0 : diff < 0.0; };
    d.upper_tail_flag = points_rejected_way(d.upper_tail_diff);
    d.above_lo_flag = points_rejected_way(d.above_lo_diff);
    d.interior_mean_flag = d.interior_obs_defined && d.interior_twin_defined &&
                           points_rejected_way(d.interior_mean_diff);
    return d;
}

}  // namespace twinfal
