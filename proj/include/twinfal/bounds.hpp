#pragma once

#include <cstddef>
#include <vector>

#include "twinfal/regions.hpp"
#include "twinfal/trajectory.hpp"

namespace twinfal {

// Filtered counts and sample means for one hypothesis. Means are NaN when the
// corresponding count is zero; gating logic lives in the testing module.
struct BoundEstimate {
    std::size_t n = 0;        // filtered observational trajectories
    std::size_t n_match = 0;  // among them, full action matches
    double mu_lo = 0.0;
    double mu_up = 0.0;
    std::size_t n_hat = 0;  // filtered twin trajectories
    double mu_hat = 0.0;
    double y_lo = 0.0;
    double y_up = 1.0;

    bool has_obs() const { return n > 0; }
    bool has_twin() const { return n_hat > 0; }
    double width() const { return mu_up - mu_lo; }
    double match_fraction() const {
        return n == 0 ? 0.0 : static_cast<double>(n_match) / static_cast<double>(n);
    }
};

// Per-trajectory view of the bound estimator.
struct TrajectoryContribution {
    int match_len = 0;  // N = longest action prefix equal to the target sequence
    bool in_filter = false;
    double y_lo_value = 0.0;
    double y_up_value = 0.0;
};

// N := max {0 <= s <= t | A_{1:s} = a_{1:s}}.
int match_length(const ObservedTrajectory& traj, const std::vector<int>& actions);

// One contribution per trajectory. in_filter requires x0 in B_0 and X_s in B_s
// for 1 <= s <= N; a full match contributes f(X) to both sides, otherwise the
// worst-case fallbacks y_lo / y_up.
std::vector<TrajectoryContribution> obs_filter(const Dataset& data, const Hypothesis& hyp);

// Does the twin record fall inside B_{0:t}? (No N-truncation: twin actions are fixed.)
bool twin_in_regions(const TwinTrajectory& rec, const Hypothesis& hyp);

// Sample means of Y_lo / Y_up over the filtered observational trajectories and
// of clipped outcomes over the filtered twin trajectories, accumulated in
// record order with compensated summation.
BoundEstimate estimate_bounds(const Dataset& data, const TwinDataset& twin, const Hypothesis& hyp);

// Observational side only; twin counts stay zero.
BoundEstimate estimate_obs_bounds(const Dataset& data, const Hypothesis& hyp);

// Unclipped outcome values of the gate witnesses: full action match and
// X_{0:t} in B_{0:t}. Used by the rejection diagnostics.
std::vector<double> obs_matched_outcomes(const Dataset& data, const Hypothesis& hyp);
std::vector<double> twin_filtered_outcomes(const TwinDataset& twin, const Hypothesis& hyp);

enum class AttainMode { AttainLo, AttainUp };

// Exact oracle transform: rewrites every non-matching trajectory into the
// interventional trajectory of a process that attains the bound, i.e. actions
// become the target sequence, states after step N become the fill points, and
// the outcome feature at time t is pinned so f evaluates to y_lo (AttainLo) or
// y_up (AttainUp). Matching trajectories are untouched. Re-estimating on the
// result reproduces the original mu_lo (resp. mu_up) bitwise as both bounds.
Dataset sharpness_transform(const Dataset& data, const Hypothesis& hyp,
                            const std::vector<std::vector<double>>& fill, AttainMode mode);

// Same tuple with every region replaced by the whole space.
Hypothesis manski_hypothesis(const Hypothesis& hyp);

}  // namespace twinfal
