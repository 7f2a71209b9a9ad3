#include "twinfal/bounds.hpp"

#include <cmath>
#include <limits>

#include "twinfal/error.hpp"
#include "twinfal/numeric.hpp"

namespace twinfal {

int match_length(const ObservedTrajectory& traj, const std::vector<int>& actions) {
    if (actions.size() > traj.steps.size()) {
        throw ValidationError("match_length: action sequence longer than the trajectory");
    }
    int n = 0;
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (traj.steps[s].action != actions[s]) break;
        ++n;
    }
    return n;
}

std::vector<TrajectoryContribution> obs_filter(const Dataset& data, const Hypothesis& hyp) {
    hyp.validate(data.schema);
    std::vector<TrajectoryContribution> out;
    out.reserve(data.records.size());
    const int t = hyp.t;
    for (const auto& rec : data.records) {
        TrajectoryContribution c;
        c.match_len = match_length(rec, hyp.actions);
        // Filter condition: x0 in B_0 and X_s in B_s for every 1 <= s <= N.
        c.in_filter = hyp.regions.regions[0].contains(rec.x0);
        for (int s = 1; s <= c.match_len && c.in_filter; ++s) {
            c.in_filter = hyp.regions.regions[s].contains(rec.steps[s - 1].obs);
        }
        if (c.match_len == t) {
            const double f = hyp.outcome.value(rec.steps[t - 1].obs);
            c.y_lo_value = f;
            c.y_up_value = f;
        } else {
            c.y_lo_value = hyp.outcome.y_lo;
            c.y_up_value = hyp.outcome.y_up;
        }
        out.push_back(c);
    }
    return out;
}

bool twin_in_regions(const TwinTrajectory& rec, const Hypothesis& hyp) {
    if (!hyp.regions.regions[0].contains(rec.x0)) return false;
    for (int s = 1; s <= hyp.t; ++s) {
        if (!hyp.regions.regions[s].contains(rec.states[s - 1])) return false;
    }
    return true;
}

BoundEstimate estimate_obs_bounds(const Dataset& data, const Hypothesis& hyp) {
    BoundEstimate est;
    est.y_lo = hyp.outcome.y_lo;
    est.y_up = hyp.outcome.y_up;

    KahanSum sum_lo, sum_up;
    for (const auto& c : obs_filter(data, hyp)) {
        if (!c.in_filter) continue;
        ++est.n;
        if (c.match_len == hyp.t) ++est.n_match;
        sum_lo.add(c.y_lo_value);
        sum_up.add(c.y_up_value);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    est.mu_lo = est.n ? sum_lo.value() / static_cast<double>(est.n) : nan;
    est.mu_up = est.n ? sum_up.value() / static_cast<double>(est.n) : nan;
    est.mu_hat = nan;
    return est;
}

BoundEstimate estimate_bounds(const Dataset& data, const TwinDataset& twin, const Hypothesis& hyp) {
    if (!twin.records.empty() && twin.actions != hyp.actions) {
        throw ValidationError("estimate_bounds: twin action sequence does not match the hypothesis");
    }
    BoundEstimate est = estimate_obs_bounds(data, hyp);

    KahanSum sum_hat;
    for (const auto& rec : twin.records) {
        if (!twin_in_regions(rec, hyp)) continue;
        ++est.n_hat;
        sum_hat.add(hyp.outcome.value(rec.states[hyp.t - 1]));
    }
    if (est.n_hat) est.mu_hat = sum_hat.value() / static_cast<double>(est.n_hat);
    return est;
}

std::vector<double> obs_matched_outcomes(const Dataset& data, const Hypothesis& hyp) {
    std::vector<double> out;
    const auto contributions = obs_filter(data, hyp);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        if (contributions[i].in_filter && contributions[i].match_len == hyp.t) {
            out.push_back(hyp.outcome.raw(data.records[i].steps[hyp.t - 1].obs));
        }
    }
    return out;
}

std::vector<double> twin_filtered_outcomes(const TwinDataset& twin, const Hypothesis& hyp) {
    std::vector<double> out;
    for (const auto& rec : twin.records) {
        if (twin_in_regions(rec, hyp)) out.push_back(hyp.outcome.raw(rec.states[hyp.t - 1]));
    }
    return out;
}

Dataset sharpness_transform(const Dataset& data, const Hypothesis& hyp,
                            const std::vector<std::vector<double>>& fill, AttainMode mode) {
    hyp.validate(data.schema);
    const int t = hyp.t;
    if (static_cast<int>(fill.size()) != t) {
        throw ValidationError("sharpness_transform: fill must provide points for steps 1..t");
    }
    const double pinned = mode == AttainMode::AttainLo ? hyp.outcome.y_lo : hyp.outcome.y_up;
    for (int s = 1; s <= t; ++s) {
        if (static_cast<int>(fill[s - 1].size()) != data.schema.dims[s]) {
            throw ValidationError("sharpness_transform: fill point dimension mismatch at step " +
                                  std::to_string(s));
        }
        // The step-t point carries the pinned outcome value, so that is what
        // must lie in B_t for the attainment identity to hold.
        std::vector<double> point = fill[s - 1];
        if (s == t) point[hyp.outcome.feature] = pinned;
        if (!hyp.regions.regions[s].contains(point)) {
            throw ValidationError("sharpness_transform: fill point for step " + std::to_string(s) +
                                  " lies outside B_" + std::to_string(s));
        }
    }

    Dataset out = data;
    for (auto& rec : out.records) {
        const int n = match_length(rec, hyp.actions);
        if (n == t) continue;  // already the target counterfactual
        for (int s = 1; s <= t; ++s) rec.steps[s - 1].action = hyp.actions[s - 1];
        for (int s = n + 1; s <= t; ++s) rec.steps[s - 1].obs = fill[s - 1];
        rec.steps[t - 1].obs[hyp.outcome.feature] = pinned;
    }
    return out;
}

Hypothesis manski_hypothesis(const Hypothesis& hyp) {
    Hypothesis out = hyp;
    for (auto& region : out.regions.regions) region.constraints.clear();
    return out;
}

}  // namespace twinfal
