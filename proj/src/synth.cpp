#include "twinfal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "twinfal/error.hpp"
#include "twinfal/numeric.hpp"

namespace twinfal {

using nlohmann::json;

void SynthConfig::validate() const {
    if (horizon < 1) throw ValidationError("synth config: horizon must be >= 1");
    if (static_cast<int>(dims.size()) != horizon + 1) {
        throw ValidationError("synth config: dims must have length T+1");
    }
    if (static_cast<int>(action_counts.size()) != horizon) {
        throw ValidationError("synth config: action_counts must have length T");
    }
    for (int d : dims) {
        if (d < 1) throw ValidationError("synth config: dims must be >= 1");
    }
    for (int k : action_counts) {
        if (k < 1) throw ValidationError("synth config: action counts must be >= 1");
    }
    if (!(p_u >= 0.0 && p_u <= 1.0)) throw ValidationError("synth config: p_u must be in [0, 1]");
    if (!(bias >= 0.0 && bias <= 1.0)) throw ValidationError("synth config: bias must be in [0, 1]");
    if (!(noise > 0.0)) throw ValidationError("synth config: noise scale must be > 0");
}

SchemaSpec SynthConfig::schema() const {
    SchemaSpec s;
    s.horizon = horizon;
    s.dims = dims;
    s.action_cardinalities = action_counts;
    return s;
}

std::string SynthConfig::to_json() const {
    json j;
    j["T"] = horizon;
    j["dims"] = dims;
    j["action_counts"] = action_counts;
    j["p_u"] = p_u;
    j["effect"] = effect;
    j["bias"] = bias;
    j["noise"] = noise;
    j["seed"] = seed;
    return j.dump(2);
}

SynthConfig SynthConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("synth config: invalid JSON: ") + e.what());
    }
    SynthConfig cfg;
    try {
        cfg.horizon = j.at("T").get<int>();
        cfg.dims = j.at("dims").get<std::vector<int>>();
        cfg.action_counts = j.at("action_counts").get<std::vector<int>>();
        if (j.contains("p_u")) cfg.p_u = j["p_u"].get<double>();
        if (j.contains("effect")) cfg.effect = j["effect"].get<double>();
        if (j.contains("bias")) cfg.bias = j["bias"].get<double>();
        if (j.contains("noise")) cfg.noise = j["noise"].get<double>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("synth config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

SynthConfig load_synth_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open synth config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return SynthConfig::from_json(buf.str());
}

std::string TwinMode::to_string() const {
    switch (kind) {
        case Kind::Correct: return "correct";
        case Kind::BiasedShift: return "biased:" + format_double(delta);
        case Kind::VarianceInflated: return "varinf:" + format_double(kappa);
    }
    return "correct";
}

TwinMode TwinMode::parse(const std::string& text) {
    if (text == "correct") return correct();
    auto parse_arg = [&](const std::string& prefix) {
        const std::string arg = text.substr(prefix.size());
        try {
            std::size_t pos = 0;
            const double v = std::stod(arg, &pos);
            if (pos != arg.size()) throw std::invalid_argument(arg);
            return v;
        } catch (const std::exception&) {
            throw ValidationError("cannot parse twin mode argument in '" + text + "'");
        }
    };
    if (text.rfind("biased:", 0) == 0) return biased(parse_arg("biased:"));
    if (text.rfind("varinf:", 0) == 0) {
        const double kappa = parse_arg("varinf:");
        if (kappa < 1.0) throw ValidationError("variance inflation requires kappa >= 1");
        return variance_inflated(kappa);
    }
    throw ValidationError("unknown twin mode '" + text + "' (correct | biased:<d> | varinf:<k>)");
}

namespace {

// Behavioural half-pick: upper half of the action set when `hi`, else lower.
int pick_in_half(int cardinality, bool hi, CounterRng& rng) {
    const int half = (cardinality + 1) / 2;
    const int start = hi ? half : 0;
    const int width = hi ? cardinality - half : half;
    if (width <= 1) return start;
    return start + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(width)));
}

std::vector<double> step_state(const SynthConfig& cfg, const std::vector<double>& prev, int t,
                               int action, int u, double shift, double noise_scale,
                               CounterRng& rng) {
    const int d = cfg.dims[t];
    const int k = cfg.action_counts[t - 1];
    const double action_term =
        k > 1 ? kActionGain * (static_cast<double>(action) / (k - 1) - 0.5) : 0.0;
    std::vector<double> x(d);
    for (int j = 0; j < d; ++j) {
        const double carry = prev[std::min<std::size_t>(j, prev.size() - 1)];
        double v = kDriftRho * carry + action_term + noise_scale * rng.next_normal();
        if (j == 0) {
            if (u) v += cfg.effect;
            if (shift != 0.0) v += shift;
        }
        x[j] = v;
    }
    return x;
}

}  // namespace

Dataset generate_observational(const SynthConfig& cfg, std::size_t n, std::uint64_t seed) {
    cfg.validate();
    Dataset data;
    data.schema = cfg.schema();
    data.provenance.source = "synthetic";
    data.provenance.seed = seed;
    data.records.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(derive_key({seed, i}));
        const int u = rng.next_unit() < cfg.p_u ? 1 : 0;

        ObservedTrajectory rec;
        rec.x0.resize(cfg.dims[0]);
        for (double& v : rec.x0) v = rng.next_normal();

        const std::vector<double>* prev = &rec.x0;
        for (int t = 1; t <= cfg.horizon; ++t) {
            const int k = cfg.action_counts[t - 1];
            // Half-pick driven by U with probability `bias`, else by a
            // logistic flip on the previous state's first coordinate.
            const bool confounded = rng.next_unit() < cfg.bias;
            bool hi;
            if (confounded) {
                hi = u == 1;
            } else {
                const double p_hi = 1.0 / (1.0 + std::exp(-(*prev)[0]));
                hi = rng.next_unit() < p_hi;
            }
            ObservedTrajectory::Step step;
            step.action = k > 1 ? pick_in_half(k, hi, rng) : 0;
            step.obs = step_state(cfg, *prev, t, step.action, u, 0.0, cfg.noise, rng);
            rec.steps.push_back(std::move(step));
            prev = &rec.steps.back().obs;
        }
        data.records.push_back(std::move(rec));
    }
    return data;
}

std::vector<std::vector<double>> simulate_twin_states(const SynthConfig& cfg, const TwinMode& mode,
                                                      const std::vector<double>& x0,
                                                      const std::vector<int>& actions,
                                                      std::uint64_t stream_seed) {
    cfg.validate();
    if (actions.size() > static_cast<std::size_t>(cfg.horizon)) {
        throw ValidationError("twin action sequence longer than the horizon");
    }
    CounterRng rng(stream_seed);
    // X_0 is independent of U, so the interventional conditional given x0
    // draws U from its prior.
    const int u = rng.next_unit() < cfg.p_u ? 1 : 0;
    const double shift = mode.kind == TwinMode::Kind::BiasedShift ? mode.delta : 0.0;
    const double noise_scale =
        mode.kind == TwinMode::Kind::VarianceInflated ? cfg.noise * mode.kappa : cfg.noise;

    std::vector<std::vector<double>> states;
    states.reserve(actions.size());
    const std::vector<double>* prev = &x0;
    for (std::size_t t = 1; t <= actions.size(); ++t) {
        const int k = cfg.action_counts[t - 1];
        if (actions[t - 1] < 0 || actions[t - 1] >= k) {
            throw ValidationError("twin action id out of range at step " + std::to_string(t));
        }
        states.push_back(
            step_state(cfg, *prev, static_cast<int>(t), actions[t - 1], u, shift, noise_scale, rng));
        prev = &states.back();
    }
    return states;
}

std::vector<std::vector<double>> sample_x0_pool(const Dataset& data, std::size_t n,
                                                std::uint64_t seed) {
    if (n > data.records.size()) {
        throw ValidationError("x0 pool request exceeds the dataset (" + std::to_string(n) + " > " +
                              std::to_string(data.records.size()) + "); each x0 is used at most once");
    }
    std::vector<std::size_t> idx(data.records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    CounterRng rng(derive_key({seed, 0xA11Dull}));
    std::vector<std::vector<double>> pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.next_below(idx.size() - i);
        std::swap(idx[i], idx[j]);
        pool.push_back(data.records[idx[i]].x0);
    }
    return pool;
}

TwinDataset generate_twin(const SynthConfig& cfg, const TwinMode& mode,
                          const std::vector<std::vector<double>>& x0_pool,
                          const std::vector<int>& actions, std::uint64_t seed) {
    cfg.validate();
    TwinDataset twin;
    twin.schema = cfg.schema();
    twin.actions = actions;
    twin.provenance.source = "synthetic-twin:" + mode.to_string();
    twin.provenance.seed = seed;
    twin.records.reserve(x0_pool.size());
    for (std::size_t i = 0; i < x0_pool.size(); ++i) {
        if (static_cast<int>(x0_pool[i].size()) != cfg.dims[0]) {
            throw ValidationError("x0 pool entry " + std::to_string(i) + " has wrong dimension");
        }
        TwinTrajectory rec;
        rec.x0 = x0_pool[i];
        rec.actions = actions;
        rec.states = simulate_twin_states(cfg, mode, rec.x0, actions, wire_seed(seed, i));
        twin.records.push_back(std::move(rec));
    }
    return twin;
}

OracleEstimate interventional_oracle(const SynthConfig& cfg, const std::vector<int>& actions,
                                     const RegionSequence& regions, const OutcomeSpec& outcome,
                                     std::size_t n_draws, std::uint64_t seed) {
    cfg.validate();
    if (n_draws < 1) throw ValidationError("oracle needs at least one draw");
    const auto t = actions.size();
    if (regions.regions.size() != t + 1) {
        throw ValidationError("oracle region sequence must have length t+1");
    }

    KahanSum sum, sumsq;
    OracleEstimate est;
    est.draws = n_draws;
    for (std::size_t k = 0; k < n_draws; ++k) {
        CounterRng rng(derive_key({seed, k, 0x0AC1Eull}));
        const int u = rng.next_unit() < cfg.p_u ? 1 : 0;
        std::vector<double> x0(cfg.dims[0]);
        for (double& v : x0) v = rng.next_normal();
        if (!regions.regions[0].contains(x0)) continue;

        bool accepted = true;
        std::vector<double> prev = x0;
        std::vector<double> x_t;
        for (std::size_t s = 1; s <= t; ++s) {
            x_t = step_state(cfg, prev, static_cast<int>(s), actions[s - 1], u, 0.0, cfg.noise, rng);
            if (!regions.regions[s].contains(x_t)) {
                accepted = false;
                break;
            }
            prev = x_t;
        }
        if (!accepted) continue;

        ++est.accepted;
        const double y = outcome.value(x_t);
        sum.add(y);
        sumsq.add(y * y);
    }
    if (est.accepted == 0) {
        throw ValidationError("oracle: no draw satisfied the region event; increase n_draws or "
                              "loosen the regions");
    }
    const auto m = static_cast<double>(est.accepted);
    est.mean = sum.value() / m;
    const double variance = std::max(0.0, sumsq.value() / m - est.mean * est.mean);
    est.stderr_ = std::sqrt(variance / m);
    return est;
}

}  // namespace twinfal
