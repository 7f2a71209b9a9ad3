#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twinfal/regions.hpp"
#include "twinfal/rng.hpp"
#include "twinfal/trajectory.hpp"

namespace twinfal {

// Linear-Gaussian process with one hidden binary confounder: the smallest
// family where the confounding gap, the interventional oracle and closed-form
// checks are all tractable by hand.
//
//   U ~ Bernoulli(p_u)                  (never emitted)
//   X_0 ~ N(0, I)
//   X_t = rho X_{t-1} + gain (a_t/(K_t-1) - 1/2) e + effect U e_0 + noise eps_t
//
// with rho = kDriftRho, gain = kActionGain, e the all-ones direction on the
// action term, e_0 the first coordinate. The behavioural agent picks the upper
// or lower half of the action set: with probability `bias` the half is chosen
// by U, otherwise by a logistic flip on the previous state's first coordinate.
// bias = 0 therefore makes the data unconfounded by construction, and
// p_u = 0 switches the confounder pathway off entirely.
struct SynthConfig {
    int horizon = 2;
    std::vector<int> dims = {2, 2, 2};           // d_0..d_T
    std::vector<int> action_counts = {2, 2};     // |A_1|..|A_T|
    double p_u = 0.5;                            // confounder prevalence
    double effect = 1.0;                         // outcome shift when U = 1
    double bias = 1.0;                           // P(agent conditions on U)
    double noise = 0.25;                         // Gaussian noise scale, > 0
    std::uint64_t seed = 1;

    void validate() const;
    SchemaSpec schema() const;

    std::string to_json() const;
    static SynthConfig from_json(const std::string& text);
};

SynthConfig load_synth_config(const std::string& path);

inline constexpr double kDriftRho = 0.5;
inline constexpr double kActionGain = 1.0;

struct TwinMode {
    enum class Kind { Correct, BiasedShift, VarianceInflated } kind = Kind::Correct;
    double delta = 0.0;  // BiasedShift: added to the first coordinate's drift each step
    double kappa = 1.0;  // VarianceInflated: noise multiplier, >= 1

    static TwinMode correct() { return {}; }
    static TwinMode biased(double delta) { return {Kind::BiasedShift, delta, 1.0}; }
    static TwinMode variance_inflated(double kappa) { return {Kind::VarianceInflated, 0.0, kappa}; }

    std::string to_string() const;
    static TwinMode parse(const std::string& text);  // "correct" | "biased:<d>" | "varinf:<k>"
};

// Per-trajectory streams derive from (seed, index); identical configs and
// seeds produce byte-identical datasets.
Dataset generate_observational(const SynthConfig& cfg, std::size_t n, std::uint64_t seed);

// The exact interventional conditional given x0 (U is independent of X_0, so
// its posterior is the prior). This is the single simulation routine shared by
// the in-process twin and the wire-protocol twin tool; record i of
// generate_twin uses the stream keyed by wire_seed(seed, i).
std::vector<std::vector<double>> simulate_twin_states(const SynthConfig& cfg, const TwinMode& mode,
                                                      const std::vector<double>& x0,
                                                      const std::vector<int>& actions,
                                                      std::uint64_t stream_seed);

// Distinct x0 values drawn without replacement from the dataset's records.
std::vector<std::vector<double>> sample_x0_pool(const Dataset& data, std::size_t n,
                                                std::uint64_t seed);

TwinDataset generate_twin(const SynthConfig& cfg, const TwinMode& mode,
                          const std::vector<std::vector<double>>& x0_pool,
                          const std::vector<int>& actions, std::uint64_t seed);

struct OracleEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t accepted = 0;
    std::size_t draws = 0;
};

// Brute-force Monte Carlo of E[f(X_{0:t}(a)) | X_{0:t}(a) in B_{0:t}] under
// do(a_{1:t}): U from its prior, actions forced, region event by rejection.
OracleEstimate interventional_oracle(const SynthConfig& cfg, const std::vector<int>& actions,
                                     const RegionSequence& regions, const OutcomeSpec& outcome,
                                     std::size_t n_draws, std::uint64_t seed);

}  // namespace twinfal
