#include "twinfal/regions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "twinfal/error.hpp"

namespace twinfal {

using nlohmann::json;

double quantile_nearest_rank(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

bool BoxRegion::contains(const std::vector<double>& x) const {
    for (const auto& c : constraints) {
        if (c.feature < 0 || static_cast<std::size_t>(c.feature) >= x.size()) {
            throw ValidationError("region constraint references feature " +
                                  std::to_string(c.feature) + " but the vector has dimension " +
                                  std::to_string(x.size()));
        }
        const double v = x[c.feature];
        if (c.lower_closed ? v < c.lower : v <= c.lower) return false;
        if (c.upper_closed ? v > c.upper : v >= c.upper) return false;
    }
    return true;
}

void Hypothesis::validate(const SchemaSpec& schema) const {
    schema.validate();
    if (t < 1 || t > schema.horizon) {
        throw ValidationError("hypothesis " + id + ": t out of range [1, T]");
    }
    if (outcome.time != t) throw ValidationError("hypothesis " + id + ": outcome.time != t");
    if (outcome.feature < 0 || outcome.feature >= schema.dims[t]) {
        throw ValidationError("hypothesis " + id + ": outcome feature out of range");
    }
    if (!(outcome.y_lo < outcome.y_up)) {
        throw ValidationError("hypothesis " + id + ": requires y_lo < y_up");
    }
    if (static_cast<int>(actions.size()) != t) {
        throw ValidationError("hypothesis " + id + ": actions must have length t");
    }
    for (int s = 1; s <= t; ++s) {
        const int a = actions[s - 1];
        if (a < 0 || a >= schema.action_cardinalities[s - 1]) {
            throw ValidationError("hypothesis " + id + ": action id out of range at step " +
                                  std::to_string(s));
        }
    }
    if (static_cast<int>(regions.regions.size()) != t + 1) {
        throw ValidationError("hypothesis " + id + ": regions must have length t+1");
    }
    for (int s = 0; s <= t; ++s) {
        for (const auto& c : regions.regions[s].constraints) {
            if (c.feature < 0 || c.feature >= schema.dims[s]) {
                throw ValidationError("hypothesis " + id + ": region " + std::to_string(s) +
                                      " constrains a feature invalid at that timestep");
            }
            if (!(c.lower <= c.upper)) {
                throw ValidationError("hypothesis " + id + ": constraint with lower > upper");
            }
        }
    }
}

namespace {

json constraint_to_json(const IntervalConstraint& c) {
    json j;
    j["feature"] = c.feature;
    j["lower"] = std::isinf(c.lower) ? json(nullptr) : json(c.lower);
    j["upper"] = std::isinf(c.upper) ? json(nullptr) : json(c.upper);
    j["lower_closed"] = c.lower_closed;
    j["upper_closed"] = c.upper_closed;
    return j;
}

IntervalConstraint constraint_from_json(const json& j) {
    IntervalConstraint c;
    c.feature = j.at("feature").get<int>();
    if (j.contains("lower") && !j["lower"].is_null()) c.lower = j["lower"].get<double>();
    if (j.contains("upper") && !j["upper"].is_null()) c.upper = j["upper"].get<double>();
    if (j.contains("lower_closed")) c.lower_closed = j["lower_closed"].get<bool>();
    if (j.contains("upper_closed")) c.upper_closed = j["upper_closed"].get<bool>();
    return c;
}

json hypothesis_to_json(const Hypothesis& h) {
    json j;
    j["t"] = h.t;
    j["outcome"] = {{"time", h.outcome.time},
                    {"feature", h.outcome.feature},
                    {"y_lo", h.outcome.y_lo},
                    {"y_up", h.outcome.y_up}};
    j["actions"] = h.actions;
    json regions = json::array();
    for (const auto& region : h.regions.regions) {
        json r = json::array();
        for (const auto& c : region.constraints) r.push_back(constraint_to_json(c));
        regions.push_back(r);
    }
    j["regions"] = regions;
    j["direction"] = direction_name(h.direction);
    j["id"] = h.id;
    return j;
}

Hypothesis hypothesis_from_json(const json& j) {
    Hypothesis h;
    h.t = j.at("t").get<int>();
    const json& o = j.at("outcome");
    h.outcome.time = o.at("time").get<int>();
    h.outcome.feature = o.at("feature").get<int>();
    h.outcome.y_lo = o.at("y_lo").get<double>();
    h.outcome.y_up = o.at("y_up").get<double>();
    h.actions = j.at("actions").get<std::vector<int>>();
    for (const auto& r : j.at("regions")) {
        BoxRegion region;
        for (const auto& c : r) region.constraints.push_back(constraint_from_json(c));
        h.regions.regions.push_back(std::move(region));
    }
    const std::string dir = j.at("direction").get<std::string>();
    if (dir == "lo") {
        h.direction = Direction::Lo;
    } else if (dir == "up") {
        h.direction = Direction::Up;
    } else {
        throw ValidationError("hypothesis direction must be 'lo' or 'up', got '" + dir + "'");
    }
    h.id = j.at("id").get<std::string>();
    return h;
}

}  // namespace

std::string hypotheses_to_json(const std::vector<Hypothesis>& hyps) {
    json arr = json::array();
    for (const auto& h : hyps) arr.push_back(hypothesis_to_json(h));
    return arr.dump(2);
}

std::vector<Hypothesis> hypotheses_from_json(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("hypothesis file: invalid JSON: ") + e.what());
    }
    if (!arr.is_array()) throw ValidationError("hypothesis file must be a JSON list");
    std::vector<Hypothesis> out;
    out.reserve(arr.size());
    for (const auto& j : arr) {
        try {
            out.push_back(hypothesis_from_json(j));
        } catch (const json::exception& e) {
            throw ValidationError(std::string("hypothesis entry: ") + e.what());
        }
    }
    return out;
}

std::vector<Hypothesis> load_hypotheses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open hypothesis file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return hypotheses_from_json(buf.str());
}

void save_hypotheses(const std::vector<Hypothesis>& hyps, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write hypothesis file: " + path);
    out << hypotheses_to_json(hyps) << '\n';
}

std::string GeneratorConfig::to_json() const {
    json j;
    j["quantile_lo"] = quantile_lo;
    j["quantile_up"] = quantile_up;
    json plan = json::array();
    for (const auto& b : bin_plan) {
        json e;
        if (b.feature == BinSpec::kOutcomeFeature) {
            e["feature"] = "outcome";
        } else {
            e["feature"] = b.feature;
        }
        e["kind"] = b.kind == BinSpec::Kind::Categorical ? "categorical" : "quantile";
        e["count"] = b.count;
        plan.push_back(e);
    }
    j["bin_plan"] = plan;
    j["outcome_features"] = outcome_features;
    j["timesteps"] = timesteps;
    j["min_support"] = min_support;
    return j.dump(2);
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("generator config: invalid JSON: ") + e.what());
    }
    GeneratorConfig cfg;
    try {
        if (j.contains("quantile_lo")) cfg.quantile_lo = j["quantile_lo"].get<double>();
        if (j.contains("quantile_up")) cfg.quantile_up = j["quantile_up"].get<double>();
        for (const auto& e : j.at("bin_plan")) {
            BinSpec b;
            if (e.at("feature").is_string()) {
                if (e["feature"].get<std::string>() != "outcome") {
                    throw ValidationError("bin_plan feature must be an index or \"outcome\"");
                }
                b.feature = BinSpec::kOutcomeFeature;
            } else {
                b.feature = e["feature"].get<int>();
            }
            const std::string kind = e.at("kind").get<std::string>();
            if (kind == "categorical") {
                b.kind = BinSpec::Kind::Categorical;
            } else if (kind == "quantile") {
                b.kind = BinSpec::Kind::Quantile;
            } else {
                throw ValidationError("bin_plan kind must be 'categorical' or 'quantile'");
            }
            b.count = e.at("count").get<int>();
            cfg.bin_plan.push_back(b);
        }
        cfg.outcome_features = j.at("outcome_features").get<std::vector<int>>();
        cfg.timesteps = j.at("timesteps").get<std::vector<int>>();
        if (j.contains("min_support")) cfg.min_support = j["min_support"].get<int>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("generator config: ") + e.what());
    }
    if (!(cfg.quantile_lo > 0.0 && cfg.quantile_lo < cfg.quantile_up && cfg.quantile_up < 1.0)) {
        throw ValidationError("generator config: need 0 < quantile_lo < quantile_up < 1");
    }
    if (cfg.min_support < 1) throw ValidationError("generator config: min_support must be >= 1");
    for (const auto& b : cfg.bin_plan) {
        if (b.count < 1) throw ValidationError("generator config: bin count must be >= 1");
    }
    return cfg;
}

GeneratorConfig load_generator_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open generator config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return GeneratorConfig::from_json(buf.str());
}

namespace {

const std::vector<double>& timestep_values(const Dataset& holdout, int feature, int timestep,
                                           std::map<std::pair<int, int>, std::vector<double>>& cache) {
    auto key = std::make_pair(feature, timestep);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<double> vals;
    vals.reserve(holdout.records.size());
    for (const auto& rec : holdout.records) {
        const auto& x = timestep == 0 ? rec.x0 : rec.steps[timestep - 1].obs;
        if (static_cast<std::size_t>(feature) < x.size()) vals.push_back(x[feature]);
    }
    return cache.emplace(key, std::move(vals)).first->second;
}

// Resolved axis of the region grid at one timestep: ascending cut points; bin
// j covers (cuts[j-1], cuts[j]) in half-open form [c_{j-1}, c_j) with the
// first bin open below and the last open above, so bins partition the line.
struct ResolvedAxis {
    int feature = 0;
    std::vector<double> cuts;

    int bin_count() const { return static_cast<int>(cuts.size()) + 1; }

    int bin_of(double v) const {
        int b = 0;
        while (b < static_cast<int>(cuts.size()) && v >= cuts[b]) ++b;
        return b;
    }

    IntervalConstraint constraint_for(int bin) const {
        IntervalConstraint c;
        c.feature = feature;
        if (bin > 0) {
            c.lower = cuts[bin - 1];
            c.lower_closed = true;
        }
        if (bin < static_cast<int>(cuts.size())) {
            c.upper = cuts[bin];
            c.upper_closed = false;
        }
        return c;
    }
};

std::string axis_cut_key(int feature, int timestep) {
    return "f" + std::to_string(feature) + "_t" + std::to_string(timestep);
}

std::string join_ints(const std::vector<int>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

GeneratorResult generate_hypotheses(const Dataset& holdout, const GeneratorConfig& config) {
    holdout.schema.validate();
    if (holdout.records.empty()) throw ValidationError("hypothesis generation needs a nonempty holdout");
    const SchemaSpec& schema = holdout.schema;
    for (int t : config.timesteps) {
        if (t < 1 || t > schema.horizon) {
            throw ValidationError("generator config: timestep " + std::to_string(t) +
                                  " outside [1, T]");
        }
    }
    for (int f : config.outcome_features) {
        for (int t : config.timesteps) {
            if (f < 0 || f >= schema.dims[t]) {
                throw ValidationError("generator config: outcome feature " + std::to_string(f) +
                                      " invalid at timestep " + std::to_string(t));
            }
        }
    }

    GeneratorResult result;
    std::map<std::pair<int, int>, std::vector<double>> value_cache;
    std::map<std::string, std::vector<double>> recorded_cuts;

    const int max_t = *std::max_element(config.timesteps.begin(), config.timesteps.end());

    for (int outcome_feature : config.outcome_features) {
        // Resolve the bin axes once per (outcome, timestep); cuts come from the
        // holdout only.
        std::vector<std::vector<ResolvedAxis>> axes(max_t + 1);
        for (int s = 0; s <= max_t; ++s) {
            for (const auto& spec : config.bin_plan) {
                const int feature =
                    spec.feature == BinSpec::kOutcomeFeature ? outcome_feature : spec.feature;
                if (feature < 0) throw ValidationError("generator config: negative bin feature");
                if (feature >= schema.dims[s]) continue;  // feature absent at this timestep
                ResolvedAxis axis;
                axis.feature = feature;
                if (spec.kind == BinSpec::Kind::Categorical) {
                    for (int level = 1; level < spec.count; ++level) {
                        axis.cuts.push_back(static_cast<double>(level));
                    }
                } else {
                    const auto& vals = timestep_values(holdout, feature, s, value_cache);
                    if (vals.empty()) {
                        throw ValidationError("generator config: no holdout values for feature " +
                                              std::to_string(feature) + " at timestep " +
                                              std::to_string(s));
                    }
                    for (int k = 1; k < spec.count; ++k) {
                        const double q = static_cast<double>(k) / static_cast<double>(spec.count);
                        axis.cuts.push_back(quantile_nearest_rank(vals, q));
                    }
                    recorded_cuts[axis_cut_key(feature, s)] = axis.cuts;
                }
                for (const auto& existing : axes[s]) {
                    if (existing.feature == axis.feature) {
                        throw ValidationError(
                            "generator config: bin plan resolves to duplicate feature " +
                            std::to_string(axis.feature) + " at timestep " + std::to_string(s));
                    }
                }
                axes[s].push_back(std::move(axis));
            }
        }

        for (int t : config.timesteps) {
            // Group trajectories by their realized (a_{1:t}, bin combo) key.
            struct Group {
                std::vector<int> actions;
                std::vector<std::vector<int>> bins;  // per timestep 0..t
                std::vector<double> outcome_values;
            };
            std::map<std::string, Group> groups;

            for (const auto& rec : holdout.records) {
                Group g;
                g.actions.reserve(t);
                for (int s = 1; s <= t; ++s) g.actions.push_back(rec.steps[s - 1].action);
                g.bins.resize(t + 1);
                for (int s = 0; s <= t; ++s) {
                    const auto& x = s == 0 ? rec.x0 : rec.steps[s - 1].obs;
                    for (const auto& axis : axes[s]) {
                        g.bins[s].push_back(axis.bin_of(x[axis.feature]));
                    }
                }
                g.outcome_values.push_back(rec.steps[t - 1].obs[outcome_feature]);

                std::string key = join_ints(g.actions, ',');
                key += '|';
                for (int s = 0; s <= t; ++s) {
                    key += join_ints(g.bins[s], ',');
                    key += ';';
                }
                auto [it, inserted] = groups.emplace(std::move(key), std::move(g));
                if (!inserted) it->second.outcome_values.push_back(
                    rec.steps[t - 1].obs[outcome_feature]);
            }

            for (auto& [key, group] : groups) {
                if (static_cast<int>(group.outcome_values.size()) < config.min_support) continue;

                const double y_lo = quantile_nearest_rank(group.outcome_values, config.quantile_lo);
                const double y_up = quantile_nearest_rank(group.outcome_values, config.quantile_up);

                std::string bins_label;
                for (int s = 0; s <= t; ++s) {
                    if (s) bins_label += '.';
                    bins_label += join_ints(group.bins[s], '-');
                }

                if (!(y_lo < y_up)) {
                    SkipEntry skip;
                    skip.outcome_feature = outcome_feature;
                    skip.t = t;
                    skip.actions = group.actions;
                    skip.region_key = bins_label;
                    skip.reason = "degenerate outcome interval (y_lo == y_up)";
                    result.skipped.push_back(std::move(skip));
                    continue;
                }

                RegionSequence regions;
                regions.regions.resize(t + 1);
                for (int s = 0; s <= t; ++s) {
                    for (std::size_t a = 0; a < axes[s].size(); ++a) {
                        auto c = axes[s][a].constraint_for(group.bins[s][a]);
                        if (std::isinf(c.lower) && std::isinf(c.upper)) continue;  // single bin
                        regions.regions[s].constraints.push_back(c);
                    }
                }

                for (Direction dir : {Direction::Lo, Direction::Up}) {
                    Hypothesis h;
                    h.t = t;
                    h.outcome = OutcomeSpec{t, outcome_feature, y_lo, y_up};
                    h.actions = group.actions;
                    h.regions = regions;
                    h.direction = dir;
                    h.id = "f" + std::to_string(outcome_feature) + "_t" + std::to_string(t) + "_a" +
                           join_ints(group.actions, '-') + "_b" + bins_label + "_" +
                           direction_name(dir);
                    h.validate(schema);
                    result.hypotheses.push_back(std::move(h));
                }
            }
        }
    }

    result.cut_points.assign(recorded_cuts.begin(), recorded_cuts.end());
    return result;
}

void save_skip_log(const std::vector<SkipEntry>& skipped, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write skip log: " + path);
    out << "outcome_feature,t,actions,bins,reason\n";
    for (const auto& s : skipped) {
        out << s.outcome_feature << ',' << s.t << ',' << join_ints(s.actions, '-') << ','
            << s.region_key << ",\"" << s.reason << "\"\n";
    }
}

DoseGrid make_dose_grid(const std::vector<std::vector<double>>& holdout_doses_per_drug) {
    DoseGrid grid;
    for (const auto& doses : holdout_doses_per_drug) {
        std::vector<double> nonzero;
        for (double d : doses) {
            if (d < 0.0) throw ValidationError("negative dose in holdout dose table");
            if (d > 0.0) nonzero.push_back(d);
        }
        std::vector<double> cuts;
        if (!nonzero.empty()) {
            for (int k = 1; k <= 3; ++k) {
                cuts.push_back(quantile_nearest_rank(nonzero, 0.25 * k));
            }
        }
        grid.cuts.push_back(std::move(cuts));
    }
    return grid;
}

int dose_bin(double dose, const std::vector<double>& cuts) {
    if (dose < 0.0) throw ValidationError("negative dose");
    if (dose == 0.0) return 0;
    // Nonzero bins cover (c_{k-1}, c_k]: a dose equal to a cut stays in the
    // lower bin, the last bin is unbounded above.
    int bin = 1;
    for (double c : cuts) {
        if (dose > c) ++bin;
    }
    return bin;
}

int composite_action_id(const std::vector<int>& bins, const DoseGrid& grid) {
    if (bins.size() != grid.cuts.size()) {
        throw ValidationError("composite action id: bin count does not match drug count");
    }
    int id = 0;
    for (std::size_t d = 0; d < bins.size(); ++d) {
        const int radix = grid.bins_per_drug(d);
        if (bins[d] < 0 || bins[d] >= radix) throw ValidationError("dose bin out of range");
        id = id * radix + bins[d];
    }
    return id;
}

int discretize_doses(const std::vector<double>& doses, const DoseGrid& grid) {
    if (doses.size() != grid.cuts.size()) {
        throw ValidationError("discretize_doses: dose count does not match drug count");
    }
    std::vector<int> bins;
    bins.reserve(doses.size());
    for (std::size_t d = 0; d < doses.size(); ++d) bins.push_back(dose_bin(doses[d], grid.cuts[d]));
    return composite_action_id(bins, grid);
}

}  // namespace twinfal
