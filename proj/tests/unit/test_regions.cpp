#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "brute_enumerator.hpp"
#include "test_support.hpp"
#include "twinfal/regions.hpp"

using namespace twinfal;

TEST_CASE("region membership: whole space, boundaries, conjunction") {
    BoxRegion whole;
    CHECK(whole.contains({1.0, -5.0}));

    BoxRegion closed;
    closed.constraints = {{0, 1.0, 2.0, true, true}};
    CHECK(closed.contains({2.0}));
    CHECK_FALSE(closed.contains({2.0000001}));
    CHECK(closed.contains({1.0}));

    BoxRegion open;
    open.constraints = {{0, 1.0, 2.0, false, false}};
    CHECK_FALSE(open.contains({2.0}));
    CHECK_FALSE(open.contains({1.0}));
    CHECK(open.contains({1.5}));

    BoxRegion conj;
    conj.constraints = {{0, 0.0, 10.0, true, true}, {3, 5.0, 6.0, true, true}};
    CHECK_FALSE(conj.contains({1.0, 0.0, 0.0, 0.0}));  // feature 0 ok, feature 3 not
    CHECK(conj.contains({1.0, 0.0, 0.0, 5.5}));

    CHECK_THROWS_AS(conj.contains({1.0}), ValidationError);
}

TEST_CASE("nearest-rank quantile") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(quantile_nearest_rank(v, 0.2) == 2.0);
    CHECK(quantile_nearest_rank(v, 0.8) == 8.0);
    CHECK(quantile_nearest_rank({7.0}, 0.2) == 7.0);
    CHECK(quantile_nearest_rank({7.0}, 0.9) == 7.0);
    CHECK_THROWS_AS(quantile_nearest_rank({}, 0.5), ValidationError);
}

TEST_CASE("dose discretization follows the zero bin and quartile cuts") {
    const DoseGrid grid = make_dose_grid({{10, 20, 30, 40}, {10, 20, 30, 40}});
    REQUIRE(grid.cuts[0] == std::vector<double>{10, 20, 30});

    CHECK(dose_bin(0.0, grid.cuts[0]) == 0);
    CHECK(dose_bin(20.0, grid.cuts[0]) == 2);  // doses equal to a cut stay below
    CHECK(dose_bin(10.0, grid.cuts[0]) == 1);
    CHECK(dose_bin(5.0, grid.cuts[0]) == 1);
    CHECK(dose_bin(30.5, grid.cuts[0]) == 4);
    CHECK(dose_bin(1e9, grid.cuts[0]) == 4);
    CHECK_THROWS_AS(dose_bin(-1.0, grid.cuts[0]), ValidationError);

    // Mixed radix: (IV bin 4, vaso bin 4) -> 5*4 + 4 = 24.
    CHECK(composite_action_id({4, 4}, grid) == 24);
    CHECK(composite_action_id({0, 0}, grid) == 0);
    CHECK(composite_action_id({2, 3}, grid) == 13);
    CHECK(discretize_doses({35.0, 0.0}, grid) == 20);
}

namespace {

// Holdout with an integer-coded feature 1 ("group") and a continuous feature 0
// (also the outcome). dims = {2,2}, T = 1, two actions.
Dataset crafted_holdout() {
    SchemaSpec s;
    s.horizon = 1;
    s.dims = {2, 2};
    s.action_cardinalities = {2};
    Dataset d;
    d.schema = s;
    auto rec = [](double x0f0, double group, int a, double outcome) {
        ObservedTrajectory r;
        r.x0 = {x0f0, group};
        r.steps = {{a, {outcome, group}}};
        return r;
    };
    // group 0, action 0: outcomes 1..5 ; group 1, action 0: outcomes 11, 12
    // group 0, action 1: outcome 42 (support 1)
    d.records = {rec(0.1, 0, 0, 1), rec(0.2, 0, 0, 2), rec(0.3, 0, 0, 3), rec(0.4, 0, 0, 4),
                 rec(0.5, 0, 0, 5), rec(0.6, 1, 0, 11), rec(0.7, 1, 0, 12), rec(0.8, 0, 1, 42)};
    return d;
}

GeneratorConfig crafted_config(int min_support = 1) {
    GeneratorConfig cfg;
    cfg.bin_plan = {{1, BinSpec::Kind::Categorical, 2}};
    cfg.outcome_features = {0};
    cfg.timesteps = {1};
    cfg.min_support = min_support;
    return cfg;
}

}  // namespace

TEST_CASE("generator keeps supported tuples and sets quantile clip bounds") {
    const auto res = generate_hypotheses(crafted_holdout(), crafted_config());

    // (a=0, group 0): 5 values 1..5 -> y_lo = 1 (ceil(.2*5)=1), y_up = 4 (ceil(.8*5)=4).
    bool found = false;
    for (const auto& h : res.hypotheses) {
        if (h.actions == std::vector<int>{0} && h.direction == Direction::Lo &&
            !h.regions.regions[0].constraints.empty() &&
            h.regions.regions[0].constraints[0].upper == 1.0) {
            found = true;
            CHECK(h.outcome.y_lo == 1.0);
            CHECK(h.outcome.y_up == 4.0);
        }
    }
    CHECK(found);

    // (a=0, group 1): 2 values -> y_lo = 11, y_up = 12; both directions emitted.
    int group1_count = 0;
    for (const auto& h : res.hypotheses) {
        if (h.actions == std::vector<int>{0} && !h.regions.regions[0].constraints.empty() &&
            h.regions.regions[0].constraints[0].lower == 1.0) {
            ++group1_count;
            CHECK(h.outcome.y_lo == 11.0);
            CHECK(h.outcome.y_up == 12.0);
        }
    }
    CHECK(group1_count == 2);

    // (a=1, group 0) has support 1: quantiles coincide -> skip-logged, not emitted.
    for (const auto& h : res.hypotheses) CHECK(h.actions != std::vector<int>{1});
    bool skipped = false;
    for (const auto& s : res.skipped) {
        if (s.actions == std::vector<int>{1}) {
            skipped = true;
            CHECK(s.reason.find("degenerate") != std::string::npos);
        }
    }
    CHECK(skipped);

    // No hypothesis for an action sequence no trajectory realized-support rule.
    for (const auto& h : res.hypotheses) {
        bool realized = false;
        for (const auto& rec : crafted_holdout().records) {
            realized |= rec.steps[0].action == h.actions[0];
        }
        CHECK(realized);
    }
}

TEST_CASE("single-trajectory holdout: tuples are found but degenerate, landing in the skip log") {
    Dataset d = crafted_holdout();
    d.records.resize(1);
    const auto res = generate_hypotheses(d, crafted_config());
    CHECK(res.hypotheses.empty());
    REQUIRE(res.skipped.size() == 1);
    CHECK(res.skipped[0].actions == std::vector<int>{0});
}

TEST_CASE("min support above the dataset size yields nothing") {
    const auto res = generate_hypotheses(crafted_holdout(), crafted_config(100));
    CHECK(res.hypotheses.empty());
    CHECK(res.skipped.empty());
}

TEST_CASE("every generated hypothesis clips into [y_lo, y_up] and has the claimed support") {
    const auto holdout = crafted_holdout();
    const auto res = generate_hypotheses(holdout, crafted_config());
    for (const auto& h : res.hypotheses) {
        CHECK(h.outcome.y_lo < h.outcome.y_up);
        CHECK(h.outcome.value({1e308, 0.0}) == h.outcome.y_up);
        CHECK(h.outcome.value({-1e308, 0.0}) == h.outcome.y_lo);
        // Support, re-checked by brute force.
        std::size_t support = 0;
        for (const auto& rec : holdout.records) {
            if (rec.steps[0].action != h.actions[0]) continue;
            if (!h.regions.regions[0].contains(rec.x0)) continue;
            if (!h.regions.regions[1].contains(rec.steps[0].obs)) continue;
            ++support;
        }
        CHECK(support >= 1);
    }
}

TEST_CASE("bin regions at a fixed timestep partition the space") {
    // Build all bin regions of the crafted setup at timestep 1 and check that
    // random points land in exactly one combined region.
    const auto holdout = crafted_holdout();
    GeneratorConfig cfg = crafted_config();
    cfg.bin_plan.push_back({0, BinSpec::Kind::Quantile, 4});
    const auto res = generate_hypotheses(holdout, cfg);
    REQUIRE(!res.hypotheses.empty());

    // Collect the distinct B_1 regions over all hypotheses with t=1 and pad
    // them into the full 2x4 grid by brute enumeration of the same cuts.
    std::vector<double> vals;
    for (const auto& rec : holdout.records) vals.push_back(rec.steps[0].obs[0]);
    std::vector<double> cuts;
    for (int k = 1; k < 4; ++k) {
        cuts.push_back(brute::nearest_rank_quantile(vals, k / 4.0));
    }
    CounterRng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const std::vector<double> x = {vals[rng.next_below(vals.size())] + rng.next_normal(),
                                       static_cast<double>(rng.next_below(2))};
        int hits = 0;
        for (int group = 0; group < 2; ++group) {
            for (int b = 0; b <= 3; ++b) {
                BoxRegion r;
                IntervalConstraint cg;
                cg.feature = 1;
                if (group == 0) {
                    cg.upper = 1.0;
                    cg.upper_closed = false;
                } else {
                    cg.lower = 1.0;
                }
                r.constraints.push_back(cg);
                IntervalConstraint cv;
                cv.feature = 0;
                if (b > 0) cv.lower = cuts[b - 1];
                if (b < 3) {
                    cv.upper = cuts[b];
                    cv.upper_closed = false;
                }
                r.constraints.push_back(cv);
                if (r.contains(x)) ++hits;
            }
        }
        CHECK(hits == 1);
    }
}

TEST_CASE("generator output equals the brute-force enumeration on crafted data") {
    const auto holdout = crafted_holdout();
    GeneratorConfig cfg = crafted_config();
    cfg.bin_plan.push_back({0, BinSpec::Kind::Quantile, 2});
    const auto res = generate_hypotheses(holdout, cfg);
    const auto gen_set = brute::canonicalize(res.hypotheses);
    const auto brute_set = brute::enumerate_all(holdout, cfg);
    CHECK(gen_set.entries == brute_set.entries);
    CHECK(!gen_set.entries.empty());
}

TEST_CASE("hypothesis JSON round-trip") {
    const auto holdout = crafted_holdout();
    const auto res = generate_hypotheses(holdout, crafted_config());
    REQUIRE(!res.hypotheses.empty());
    const std::string text = hypotheses_to_json(res.hypotheses);
    const auto loaded = hypotheses_from_json(text);
    REQUIRE(loaded.size() == res.hypotheses.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) CHECK(loaded[i] == res.hypotheses[i]);
}

TEST_CASE("duplicate bin-plan features are rejected") {
    GeneratorConfig cfg = crafted_config();
    cfg.bin_plan.push_back({1, BinSpec::Kind::Quantile, 2});
    CHECK_THROWS_AS(generate_hypotheses(crafted_holdout(), cfg), ValidationError);
}
