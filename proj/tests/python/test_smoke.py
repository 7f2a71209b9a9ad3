"""Smoke tests for the python bindings: drive the main operations end to end."""

import math

import pytest

import _twinfal as tf


@pytest.fixture(scope="module")
def synth_setup():
    cfg = tf.SynthConfig()
    cfg.horizon = 2
    cfg.dims = [2, 2, 2]
    cfg.action_counts = [2, 2]
    cfg.bias = 1.0
    cfg.effect = 1.0
    cfg.noise = 0.25
    data = tf.generate_observational(cfg, 1500, 7)
    return cfg, data


def test_schema_roundtrip():
    s = tf.SchemaSpec()
    s.horizon = 2
    s.dims = [1, 1, 1]
    s.action_cardinalities = [3, 3]
    s.validate()
    loaded = tf.SchemaSpec.from_json(s.to_json())
    assert loaded.dims == [1, 1, 1]


def test_quantile_matches_nearest_rank():
    assert tf.quantile_nearest_rank(list(range(1, 11)), 0.2) == 2
    assert tf.quantile_nearest_rank(list(range(1, 11)), 0.8) == 8


def test_micro_dataset_bounds():
    s = tf.SchemaSpec()
    s.horizon = 2
    s.dims = [1, 1, 1]
    s.action_cardinalities = [3, 3]

    data = tf.Dataset()
    data.schema = s
    records = []
    for a1, a2, y in [(1, 1, 0.5), (1, 2, 0.9), (2, 1, 0.4)]:
        rec = tf.ObservedTrajectory()
        rec.x0 = [0.0]
        s1 = tf.Step()
        s1.action = a1
        s1.obs = [0.0]
        s2 = tf.Step()
        s2.action = a2
        s2.obs = [y]
        rec.steps = [s1, s2]
        records.append(rec)
    data.records = records

    hyp = tf.Hypothesis()
    hyp.t = 2
    outcome = tf.OutcomeSpec()
    outcome.time = 2
    outcome.feature = 0
    outcome.y_lo = 0.0
    outcome.y_up = 1.0
    hyp.outcome = outcome
    hyp.actions = [1, 1]
    regions = tf.RegionSequence()
    regions.regions = [tf.BoxRegion(), tf.BoxRegion(), tf.BoxRegion()]
    hyp.regions = regions
    hyp.id = "micro"

    est = tf.estimate_obs_bounds(data, hyp)
    assert est.n == 3
    assert est.n_match == 1
    assert est.mu_lo == pytest.approx(1.0 / 6.0, abs=1e-15)
    assert est.mu_up == pytest.approx(5.0 / 6.0, abs=1e-15)
    assert est.width == pytest.approx((1.0 - 1.0 / 3.0), abs=1e-12)


def test_full_pipeline_rejects_biased_twin(synth_setup):
    cfg, data = synth_setup
    holdout, rest = tf.split_holdout(data, 0.1, 3)

    gen = tf.GeneratorConfig()
    gen.bin_plan = [tf.BinSpec(tf.BinSpec.OUTCOME_FEATURE, "quantile", 2)]
    gen.outcome_features = [0]
    gen.timesteps = [1]
    result = tf.generate_hypotheses(holdout, gen)
    assert len(result.hypotheses) > 0

    sequences = {tuple(h.actions) for h in result.hypotheses}
    opts = tf.TestOptions()
    opts.seed = 5

    def run(mode):
        twins = tf.TwinStore()
        for actions in sorted(sequences):
            pool = tf.sample_x0_pool(rest, 1200, 11)
            twins.add(tf.generate_twin(cfg, mode, pool, list(actions), 13))
        results = tf.run_tests(rest, twins, result.hypotheses, opts)
        results = tf.apply_multiplicity(results, tf.MultiplicityMethod.HOLM, 0.05)
        return sum(1 for r in results if r.reject)

    assert run(tf.TwinMode.correct()) == 0
    assert run(tf.TwinMode.biased(0.9)) >= 1


def test_hoeffding_delta_formula():
    delta = tf.hoeffding_delta(0.0, 1.0, 0.05, 200)
    assert delta == pytest.approx(math.sqrt(math.log(40.0) / 400.0), rel=1e-12)


def test_holm_worked_example():
    assert tf.holm_bonferroni([0.01, 0.04, 0.03], 0.05) == [True, False, False]


def test_validation_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        tf.quantile_nearest_rank([], 0.5)


def test_oracle_within_bounds(synth_setup):
    cfg, data = synth_setup
    hyp = tf.Hypothesis()
    hyp.t = 1
    outcome = tf.OutcomeSpec()
    outcome.time = 1
    outcome.feature = 0
    outcome.y_lo = -1.2
    outcome.y_up = 0.0
    hyp.outcome = outcome
    hyp.actions = [0]
    regions = tf.RegionSequence()
    regions.regions = [tf.BoxRegion(), tf.BoxRegion()]
    hyp.regions = regions
    hyp.id = "oracle"

    est = tf.estimate_obs_bounds(data, hyp)
    oracle = tf.interventional_oracle(cfg, [0], hyp.regions, hyp.outcome, 100000, 5)
    delta = tf.hoeffding_delta(outcome.y_lo, outcome.y_up, 0.02, est.n)
    assert est.mu_lo - delta <= oracle.mean <= est.mu_up + delta
