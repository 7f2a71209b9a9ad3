#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "twinfal/numeric.hpp"
#include "twinfal/synth.hpp"
#include "twinfal/testing.hpp"

using namespace twinfal;

namespace {

SynthConfig base_config() {
    SynthConfig cfg;
    cfg.horizon = 2;
    cfg.dims = {2, 2, 2};
    cfg.action_counts = {2, 2};
    cfg.p_u = 0.5;
    cfg.effect = 1.0;
    cfg.bias = 1.0;
    cfg.noise = 0.25;
    return cfg;
}

std::string serialize(const Dataset& d) {
    std::ostringstream ss;
    for (const auto& rec : d.records) ss << observed_record_to_json(rec) << '\n';
    return ss.str();
}

std::string serialize(const TwinDataset& d) {
    std::ostringstream ss;
    for (const auto& rec : d.records) ss << twin_record_to_json(rec) << '\n';
    return ss.str();
}

}  // namespace

TEST_CASE("observational generation is byte-deterministic in the seed") {
    const auto cfg = base_config();
    const auto a = generate_observational(cfg, 200, 42);
    const auto b = generate_observational(cfg, 200, 42);
    CHECK(serialize(a) == serialize(b));
    const auto c = generate_observational(cfg, 200, 43);
    CHECK(serialize(a) != serialize(c));
}

TEST_CASE("p_u = 0 silences the confounder pathway bit-for-bit") {
    auto with_effect = base_config();
    with_effect.p_u = 0.0;
    with_effect.effect = 5.0;
    auto no_effect = with_effect;
    no_effect.effect = 0.0;
    const auto a = generate_observational(with_effect, 100, 9);
    const auto b = generate_observational(no_effect, 100, 9);
    CHECK(serialize(a) == serialize(b));
}

TEST_CASE("bias = 0 severs the action-confounder link; bias = 1 ties it") {
    // Residualize the known drift: X_1[0] - rho * x0[0] - action term =
    // effect * U + noise, so the treated-arm residual mean reveals
    // E[U | A_1 = 1]. Unconfounded data give the prior p_u; fully confounded
    // data give 1.
    auto residual_mean = [](const SynthConfig& cfg, std::uint64_t seed) {
        const auto data = generate_observational(cfg, 20000, seed);
        KahanSum sum;
        std::size_t n = 0;
        for (const auto& rec : data.records) {
            if (rec.steps[0].action != 1) continue;
            const double action_term = kActionGain * (1.0 - 0.5);
            sum.add(rec.steps[0].obs[0] - kDriftRho * rec.x0[0] - action_term);
            ++n;
        }
        REQUIRE(n > 5000);
        return sum.value() / static_cast<double>(n);
    };

    auto cfg = base_config();
    cfg.horizon = 1;
    cfg.dims = {2, 2};
    cfg.action_counts = {2};
    cfg.effect = 2.0;

    cfg.bias = 0.0;
    const double unconfounded = residual_mean(cfg, 31);
    CHECK(unconfounded == doctest::Approx(cfg.effect * cfg.p_u).epsilon(0.05));

    cfg.bias = 1.0;
    const double confounded = residual_mean(cfg, 32);
    CHECK(confounded == doctest::Approx(cfg.effect * 1.0).epsilon(0.05));
}

TEST_CASE("bias = 1 creates a detectable confounding gap") {
    auto cfg = base_config();
    cfg.horizon = 1;
    cfg.dims = {2, 2};
    cfg.action_counts = {2};
    cfg.effect = 1.0;

    const auto data = generate_observational(cfg, 5000, 13);
    KahanSum sum;
    std::size_t n = 0;
    const OutcomeSpec outcome{1, 0, -3.0, 3.0};
    for (const auto& rec : data.records) {
        if (rec.steps[0].action != 1) continue;
        sum.add(outcome.value(rec.steps[0].obs));
        ++n;
    }
    const double treated_mean = sum.value() / static_cast<double>(n);

    RegionSequence whole;
    whole.regions.resize(2);
    const auto oracle = interventional_oracle(cfg, {1}, whole, outcome, 100000, 5);
    // Treated trajectories all carry U = 1 (effect +1); the interventional
    // mean marginalizes U (effect +0.5). Gap should be about 0.5.
    CHECK(treated_mean - oracle.mean > 0.3);
}

TEST_CASE("correct twin matches the interventional conditional on a region") {
    auto cfg = base_config();
    cfg.horizon = 1;
    cfg.dims = {2, 2};
    cfg.action_counts = {2};

    const auto data = generate_observational(cfg, 30000, 3);
    const auto pool = sample_x0_pool(data, 25000, 4);
    const auto twin = generate_twin(cfg, TwinMode::correct(), pool, {1}, 5);

    RegionSequence region;
    region.regions.resize(2);
    region.regions[1].constraints = {{0, 0.0, 1e300, true, true}};  // X_1[0] >= 0
    const OutcomeSpec outcome{1, 0, -2.0, 2.0};

    KahanSum sum, sumsq;
    std::size_t n = 0;
    for (const auto& rec : twin.records) {
        if (!region.regions[1].contains(rec.states[0])) continue;
        const double v = outcome.value(rec.states[0]);
        sum.add(v);
        sumsq.add(v * v);
        ++n;
    }
    REQUIRE(n > 1000);
    const double twin_mean = sum.value() / static_cast<double>(n);
    const double twin_sd = std::sqrt(
        std::max(0.0, sumsq.value() / static_cast<double>(n) - twin_mean * twin_mean));

    const auto oracle = interventional_oracle(cfg, {1}, region, outcome, 300000, 6);
    const double se = twin_sd / std::sqrt(static_cast<double>(n)) + oracle.stderr_;
    CHECK(std::abs(twin_mean - oracle.mean) < 3.0 * se + 1e-3);
}

TEST_CASE("degenerate twin modes reproduce the correct twin exactly") {
    const auto cfg = base_config();
    const auto data = generate_observational(cfg, 50, 21);
    const auto pool = sample_x0_pool(data, 40, 22);
    const auto correct = generate_twin(cfg, TwinMode::correct(), pool, {1, 0}, 23);
    const auto biased0 = generate_twin(cfg, TwinMode::biased(0.0), pool, {1, 0}, 23);
    const auto varinf1 = generate_twin(cfg, TwinMode::variance_inflated(1.0), pool, {1, 0}, 23);
    CHECK(serialize(correct) == serialize(biased0));
    CHECK(serialize(correct) == serialize(varinf1));
}

TEST_CASE("x0 pool is drawn without replacement and bounded by the dataset") {
    const auto cfg = base_config();
    const auto data = generate_observational(cfg, 50, 77);
    const auto pool = sample_x0_pool(data, 50, 8);
    std::set<std::vector<double>> distinct(pool.begin(), pool.end());
    CHECK(distinct.size() == 50);
    CHECK_THROWS_AS(sample_x0_pool(data, 51, 8), ValidationError);
}

TEST_CASE("oracle matches the closed-form linear-Gaussian mean when effect = 0") {
    auto cfg = base_config();
    cfg.effect = 0.0;
    cfg.horizon = 2;

    // E[(X_t)_0 | do(a_1, a_2)] = sum_s rho^{t-s} * gain * (a_s/(K-1) - 1/2),
    // X_0 centered. For a = (1, 0): rho*0.5*1 + 1.0*(-0.5) at gain 1, rho 0.5.
    const double expected = kDriftRho * (kActionGain * 0.5) + kActionGain * (-0.5);

    RegionSequence whole;
    whole.regions.resize(3);
    const OutcomeSpec outcome{2, 0, -50.0, 50.0};  // clip never binds
    const auto oracle = interventional_oracle(cfg, {1, 0}, whole, outcome, 400000, 15);
    CHECK(std::abs(oracle.mean - expected) < 3.0 * oracle.stderr_ + 1e-3);

    const auto again = interventional_oracle(cfg, {1, 0}, whole, outcome, 400000, 15);
    CHECK(oracle.mean == again.mean);  // seed determinism
}

TEST_CASE("oracle rejects an impossible region event") {
    const auto cfg = base_config();
    RegionSequence region;
    region.regions.resize(2);
    region.regions[0].constraints = {{0, 1e12, 1e13, true, true}};
    const OutcomeSpec outcome{1, 0, 0.0, 1.0};
    CHECK_THROWS_AS(interventional_oracle(cfg, {1}, region, outcome, 1000, 1), ValidationError);
}

TEST_CASE("bounds cover the interventional mean on confounded data (smoke)") {
    auto cfg = base_config();
    cfg.horizon = 1;
    cfg.dims = {2, 2};
    cfg.action_counts = {2};

    Hypothesis hyp;
    hyp.t = 1;
    hyp.outcome = {1, 0, -1.2, 0.0};
    hyp.actions = {0};
    hyp.regions.regions.resize(2);
    hyp.regions.regions[1].constraints = {{0, -1e300, 0.0, true, true}};
    hyp.id = "cover";

    const auto oracle =
        interventional_oracle(cfg, hyp.actions, hyp.regions, hyp.outcome, 200000, 99);

    int covered = 0;
    const int replicates = 60;
    for (std::uint64_t rep = 0; rep < replicates; ++rep) {
        const auto data = generate_observational(cfg, 2000, derive_key({rep, 0xC0Dull}));
        const auto est = estimate_obs_bounds(data, hyp);
        REQUIRE(est.n > 0);
        const double delta = hoeffding_delta(hyp.outcome.y_lo, hyp.outcome.y_up, 0.02, est.n);
        if (oracle.mean >= est.mu_lo - delta && oracle.mean <= est.mu_up + delta) ++covered;
    }
    CHECK(covered >= 59);
}
