#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "twinfal/numeric.hpp"
#include "twinfal/trajectory.hpp"

namespace twinfal {

// One axis-aligned interval constraint. Unbounded ends use +/-infinity.
struct IntervalConstraint {
    int feature = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_closed = true;
    bool upper_closed = true;

    bool operator==(const IntervalConstraint&) const = default;
};

// Conjunction of interval constraints; an empty list is the whole space.
struct BoxRegion {
    std::vector<IntervalConstraint> constraints;

    bool contains(const std::vector<double>& x) const;  // throws on bad feature index
    bool is_whole_space() const { return constraints.empty(); }

    bool operator==(const BoxRegion&) const = default;
};

// B_0..B_t, one region per timestep prefix.
struct RegionSequence {
    std::vector<BoxRegion> regions;

    bool operator==(const RegionSequence&) const = default;
};

// f(x_{0:t}) = clip((x_t)_feature, y_lo, y_up); bounded by construction.
struct OutcomeSpec {
    int time = 0;
    int feature = 0;
    double y_lo = 0.0;
    double y_up = 1.0;

    double value(const std::vector<double>& x_t) const { return clip(x_t[feature], y_lo, y_up); }
    double raw(const std::vector<double>& x_t) const { return x_t[feature]; }

    bool operator==(const OutcomeSpec&) const = default;
};

enum class Direction { Lo, Up };

inline const char* direction_name(Direction d) { return d == Direction::Lo ? "lo" : "up"; }

struct Hypothesis {
    int t = 1;
    OutcomeSpec outcome;
    std::vector<int> actions;  // a_1..a_t
    RegionSequence regions;    // B_0..B_t
    Direction direction = Direction::Lo;
    std::string id;

    void validate(const SchemaSpec& schema) const;  // throws ValidationError

    bool operator==(const Hypothesis&) const = default;
};

std::string hypotheses_to_json(const std::vector<Hypothesis>& hyps);
std::vector<Hypothesis> hypotheses_from_json(const std::string& text);
std::vector<Hypothesis> load_hypotheses(const std::string& path);
void save_hypotheses(const std::vector<Hypothesis>& hyps, const std::string& path);

// --- data-driven hypothesis generation -------------------------------------

// One axis of the region grid. `feature == kOutcomeFeature` stands for
// "whichever outcome feature is being generated for", reproducing the pattern
// of splitting patients on the outcome quantity itself. Categorical features
// are integer-coded and binned into unit windows [v, v+1); quantile features
// are split at nearest-rank cut points computed per timestep from the holdout.
// Either way the bins partition the real line. A feature that does not exist
// at some timestep (d_s too small) simply does not constrain that timestep.
struct BinSpec {
    static constexpr int kOutcomeFeature = -1;

    int feature = 0;
    enum class Kind { Categorical, Quantile } kind = Kind::Quantile;
    int count = 2;  // number of bins (categorical levels or quantile bins)
};

struct GeneratorConfig {
    double quantile_lo = 0.2;
    double quantile_up = 0.8;
    std::vector<BinSpec> bin_plan;
    std::vector<int> outcome_features;
    std::vector<int> timesteps;  // values of t to generate for, each in [1, T]
    int min_support = 1;

    std::string to_json() const;
    static GeneratorConfig from_json(const std::string& text);
};

GeneratorConfig load_generator_config(const std::string& path);

struct SkipEntry {
    int outcome_feature = 0;
    int t = 0;
    std::vector<int> actions;
    std::string region_key;
    std::string reason;
};

struct GeneratorResult {
    std::vector<Hypothesis> hypotheses;
    std::vector<SkipEntry> skipped;
    // Quantile cut points actually used, keyed "f<feature>_t<timestep>", for provenance.
    std::vector<std::pair<std::string, std::vector<double>>> cut_points;
};

// For every outcome feature and timestep t, cross the per-timestep bin regions,
// keep the (t, a_{1:t}, B_{0:t}) triples realized by at least `min_support`
// holdout trajectories (full action match, full region membership), set
// y_lo/y_up to the quantile_lo/quantile_up nearest-rank quantiles of the
// outcome over the matching subset, and emit both directions. Degenerate
// tuples (y_lo == y_up) go to the skip log.
GeneratorResult generate_hypotheses(const Dataset& holdout, const GeneratorConfig& config);

void save_skip_log(const std::vector<SkipEntry>& skipped, const std::string& path);

// --- continuous dose discretization -----------------------------------------

// Per drug: bin 0 is exactly zero; nonzero doses fall into bins 1..4 split at
// the nearest-rank quartiles of the nonzero holdout doses, each bin covering
// (c_{k-1}, c_k] with c_0 = 0 and c_4 = +infinity.
struct DoseGrid {
    std::vector<std::vector<double>> cuts;  // per drug, ascending quartile cuts

    int bins_per_drug(std::size_t drug) const { return static_cast<int>(cuts[drug].size()) + 2; }
};

DoseGrid make_dose_grid(const std::vector<std::vector<double>>& holdout_doses_per_drug);

int dose_bin(double dose, const std::vector<double>& cuts);  // throws on negative dose

// Mixed-radix composite id, first drug most significant: 5*(IV bin) + vaso bin
// in the two-drug, five-bin case.
int composite_action_id(const std::vector<int>& bins, const DoseGrid& grid);

// Convenience: raw per-drug doses for one step -> action id.
int discretize_doses(const std::vector<double>& doses, const DoseGrid& grid);

}  // namespace twinfal
