#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twinfal/bounds.hpp"
#include "twinfal/intervals.hpp"
#include "twinfal/regions.hpp"
#include "twinfal/trajectory.hpp"

namespace twinfal {

enum class GateReason { None, NoMatchingObs, NoTwinInRegion, BootstrapMinN };

const char* gate_reason_name(GateReason r);

// Bootstrapping on tiny samples is meaningless; below this count the bootstrap
// backend refuses to reject and reports p = 1.
inline constexpr std::size_t kBootstrapMinSamples = 100;

// The numerical floor of the bootstrap p-value search grid.
inline constexpr double kAlphaFloor = 1e-6;
inline constexpr int kAlphaGridSize = 1000;

std::vector<double> alpha_grid();  // log-spaced, kAlphaFloor .. 1

struct TestOptions {
    IntervalBackend backend = IntervalBackend::Hoeffding;
    double alpha = 0.05;  // reference level for reported endpoints
    int resamples = 100;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct TestResult {
    std::string hypothesis_id;
    int outcome_feature = 0;
    int t = 0;
    Direction direction = Direction::Lo;
    GateReason gate = GateReason::None;
    double p_value = 1.0;
    double q_bound = 0.0;  // bound-side endpoint at the reference alpha
    double q_twin = 0.0;   // twin-side endpoint at the reference alpha
    BoundEstimate estimate;
    bool multiplicity_reject = false;
};

// Antecedent check: some observational trajectory with a full action match
// inside B_{0:t}, and some twin trajectory inside B_{0:t}; plus the bootstrap
// minimum-count rule. Gated hypotheses carry p = 1 and are never rejected.
GateReason gate(const Dataset& data, const TwinDataset& twin, const Hypothesis& hyp,
                IntervalBackend backend);
GateReason gate_from_estimate(const BoundEstimate& est, IntervalBackend backend);

// Closed form for the Hoeffding backend: with gap g = mu_lo - mu_hat (Lo) or
// mu_hat - mu_up (Up) and c = (y_up - y_lo) (sqrt(1/2n) + sqrt(1/2n_hat)),
// p = 1 when g <= 0, else min(1, 2 exp(-(g/c)^2)).
double p_value_hoeffding(const BoundEstimate& est, Direction direction);

// Bootstrap backends scan the alpha grid for the smallest rejecting level.
// The H_up direction negates the outcome and reuses the H_lo machinery.
double p_value_bootstrap(const std::vector<double>& bound_values,
                         const std::vector<double>& twin_values, Direction direction,
                         IntervalBackend backend, int resamples, std::uint64_t bound_seed,
                         std::uint64_t twin_seed);

// One hypothesis end to end; `twin` may be null (treated as an empty dataset).
TestResult test_hypothesis(const Dataset& data, const TwinDataset* twin, const Hypothesis& hyp,
                           const TestOptions& opts);

// Twin datasets keyed by their shared action sequence.
class TwinStore {
  public:
    void add(TwinDataset twin);
    const TwinDataset* find(const std::vector<int>& actions) const;
    std::size_t size() const { return by_actions_.size(); }
    const std::map<std::vector<int>, TwinDataset>& all() const { return by_actions_; }

  private:
    std::map<std::vector<int>, TwinDataset> by_actions_;
};

// Parallel over hypotheses; output order matches input, independent of the
// worker schedule.
std::vector<TestResult> run_tests(const Dataset& data, const TwinStore& twins,
                                  const std::vector<Hypothesis>& hyps, const TestOptions& opts);

enum class MultiplicityMethod { HolmBonferroni, BenjaminiYekutieli };

struct MultiplicityReport {
    MultiplicityMethod method = MultiplicityMethod::HolmBonferroni;
    double level = 0.05;
    std::vector<bool> reject;       // per input index
    std::vector<double> thresholds;  // the level each p-value was compared against
};

// Step-down Holm: sorted p_(j) rejected while p_(j) <= level / (m - j + 1).
MultiplicityReport holm_bonferroni(const std::vector<double>& p_values, double level);

// Step-up Benjamini-Yekutieli with harmonic correction c(m) = sum 1/i.
MultiplicityReport benjamini_yekutieli(const std::vector<double>& p_values, double level);

MultiplicityReport apply_multiplicity(std::vector<TestResult>& results, MultiplicityMethod method,
                                      double level);

// Sensitivity of the decisions to the clip interval: each delta rescales
// [y_lo, y_up] to [y_lo (1 - delta/2), y_up (1 + delta/2)] and the whole
// pipeline is rerun. Degenerate rescaled intervals skip that cell.
struct SensitivityCell {
    double delta = 0.0;
    int outcome_feature = 0;
    std::size_t hypotheses = 0;
    std::size_t rejections = 0;
    std::size_t skipped = 0;
};

struct SensitivityResult {
    std::vector<double> deltas;
    std::vector<SensitivityCell> cells;  // one per (delta, outcome feature)
};

SensitivityResult sensitivity_sweep(const Dataset& data, const TwinStore& twins,
                                    const std::vector<Hypothesis>& hyps,
                                    const std::vector<double>& deltas, const TestOptions& opts,
                                    MultiplicityMethod method, double level);

// Empirical decomposition of an H_up rejection (H_lo mirrored): the twin must
// overshoot in at least one of the upper tail mass at y_up, the mass above
// y_lo, or the interior mean on (y_lo, y_up). Differences are twin minus obs,
// computed on unclipped outcomes of the filtered, action-matched samples.
struct RejectionDiagnostics {
    double upper_tail_diff = 0.0;
    double above_lo_diff = 0.0;
    double interior_mean_diff = 0.0;
    bool interior_obs_defined = false;
    bool interior_twin_defined = false;
    bool upper_tail_flag = false;
    bool above_lo_flag = false;
    bool interior_mean_flag = false;
};

RejectionDiagnostics rejection_diagnostics(const Dataset& data, const TwinDataset& twin,
                                           const Hypothesis& hyp);

// Experimental closed-testing variant: both one-sided tests run at alpha/2, so
// a hypothesis can be positively confirmed, falsified, or left undecided. Not
// part of the standard pipeline.
enum class TwoSidedInference { Confirmed, Falsified, NoInference };

const char* two_sided_name(TwoSidedInference v);

TwoSidedInference two_sided_inference(const Dataset& data, const TwinDataset* twin,
                                      const Hypothesis& hyp, const TestOptions& opts);

}  // namespace twinfal
