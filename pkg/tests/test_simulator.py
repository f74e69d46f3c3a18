from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdtm import fixtures, vcd
from tdtm.arbitration import SEEDED_RANDOM, arbitrate
from tdtm.metrics import TIME_DOMAIN_SCOPES
from tdtm.model import COALESCED, MULTICLASS, random_model, random_sample
from tdtm.simulator import (COTM_ARCH, COTM_IDEAL, DIGITAL, HAMMING, Accelerator, ArbiterConfig, ConfigError,
                            RunConfig, apply_overrides, config_items, dump_config, parse_config_text,
                            records_rows, scaled_fine_unit, simulate)

MC = fixtures.model(fixtures.IRIS_MULTICLASS)
CO = fixtures.model(fixtures.IRIS_COALESCED)
IRIS = fixtures.iris_samples()


@pytest.mark.parametrize("model,mode", [(MC, DIGITAL), (MC, HAMMING), (CO, DIGITAL), (CO, COTM_IDEAL),
                                        (CO, COTM_ARCH)])
@pytest.mark.parametrize("arbiter", ["tba", "mesh"])
def test_iris_batch_every_mode(model, mode, arbiter):
    res = simulate(model, IRIS, RunConfig(mode=mode, arbiter=arbiter))
    assert res.violations == [] and res.diagnostics == []
    assert res.predictions == [s.label for s in IRIS]
    assert res.agreement_rate == 1.0
    assert all(r.grant_time > r.inject_time for r in res.records)


def test_mode_variant_mismatch():
    with pytest.raises(ConfigError):
        simulate(CO, IRIS, RunConfig(mode=HAMMING))
    with pytest.raises(ConfigError):
        simulate(MC, IRIS, RunConfig(mode=COTM_IDEAL))


def test_digital_mode_never_touches_time_domain():
    res = simulate(CO, IRIS, RunConfig(mode=DIGITAL))
    t = res.report.transitions
    assert all(t[s] == 0 for s in TIME_DOMAIN_SCOPES)
    assert t["classifier"] > 0 and t["clause_eval"] > 0
    td = simulate(CO, IRIS, RunConfig(mode=COTM_ARCH)).report.transitions
    assert all(td[s] > 0 for s in TIME_DOMAIN_SCOPES)


@pytest.mark.parametrize("mode,model", [(DIGITAL, MC), (HAMMING, MC), (COTM_ARCH, CO)])
def test_pipelining_beats_serialized_injection(mode, model):
    fast = simulate(model, IRIS, RunConfig(mode=mode)).report.f_infer
    slow = simulate(model, IRIS, RunConfig(mode=mode, serialized=True)).report.f_infer
    assert fast > slow


def test_single_sample_run():
    res = simulate(CO, IRIS[:1], RunConfig(mode=COTM_ARCH))
    assert res.report.samples == 1 and res.report.f_infer > 0


def _vcd_and_rows(model, cfg, samples=IRIS):
    res = simulate(model, samples, cfg)
    return vcd.dumps(res.kernel), records_rows(res), res.report.row()


def test_replay_is_identical():
    cfg = RunConfig(mode=COTM_ARCH, arbiter="mesh", seed=7,
                    mutex=ArbiterConfig(delta_meta=20, policy=SEEDED_RANDOM))
    assert _vcd_and_rows(CO, cfg) == _vcd_and_rows(CO, cfg)


@pytest.mark.parametrize("arbiter", ["tba", "mesh"])
def test_kernel_grants_match_pure_arbitration(arbiter):
    rng = np.random.default_rng(11)
    model = random_model(rng, COALESCED, 10, 8, 5)
    samples = [random_sample(rng, 10) for _ in range(15)]
    acc = Accelerator(model, RunConfig(mode=COTM_ARCH, arbiter=arbiter))
    res = acc.run(samples)
    assert res.violations == [] and res.diagnostics == []
    for rec, (launch, _) in zip(res.records, acc.bridge.pulses):
        pure = arbitrate(arbiter, [launch + d for d in rec.delays], acc.cfg.mutex.mutex())
        assert (rec.prediction, rec.grant_time) == (pure.winner, pure.grant_time)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["tba", "mesh"]), st.booleans())
def test_random_systems_agree_in_exact_modes(seed, arbiter, serialized):
    rng = np.random.default_rng(seed)
    F, C, K = int(rng.integers(2, 9)), 2 * int(rng.integers(1, 5)), int(rng.integers(1, 6))
    samples = [random_sample(rng, F) for _ in range(int(rng.integers(1, 6)))]
    for model, mode in ((random_model(rng, MULTICLASS, F, C, K), HAMMING),
                        (random_model(rng, COALESCED, F, C, K), COTM_IDEAL)):
        res = simulate(model, samples, RunConfig(mode=mode, arbiter=arbiter, serialized=serialized,
                                                 gap=int(rng.integers(0, 500))))
        assert res.violations == [] and res.diagnostics == []
        assert res.agreement_rate == 1.0


def test_seeded_random_metastability_is_reproducible_and_one_hot():
    # a wide window turns every close race into a metastable one
    cfg = RunConfig(mode=COTM_IDEAL, arbiter="mesh", seed=3,
                    mutex=ArbiterConfig(d_mutex=60, delta_meta=40, policy=SEEDED_RANDOM))
    a = simulate(CO, IRIS, cfg)
    b = simulate(CO, IRIS, cfg)
    assert a.predictions == b.predictions
    assert a.violations == []
    assert a.report.meta_events == b.report.meta_events


def test_config_round_trip():
    cfg = apply_overrides(RunConfig(), [("timing.e", "5"), ("run.power_w", "0.001"),
                                       ("arbiter.policy", SEEDED_RANDOM), ("run.serialized", "yes")])
    assert cfg.timing.e == 5 and cfg.power_w == 0.001 and cfg.serialized
    again = apply_overrides(RunConfig(), parse_config_text(dump_config(cfg)))
    assert again == cfg
    assert len(config_items(cfg)) == len(dict(config_items(cfg)))


@pytest.mark.parametrize("pairs", [
    [("timing.nope", "1")], [("nosection.x", "1")], [("mode", "x")], [("run.mode", "fast")],
    [("timing.e", "six")], [("timing.e", "6")], [("run.serialized", "maybe")], [("arbiter.delta_meta", "-1")],
    [("run.power_w", "0")],
])
def test_bad_overrides(pairs):
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), pairs)


def test_scaled_fine_unit_keeps_unit():
    for e in (2, 4, 6):
        t = scaled_fine_unit(RunConfig().timing, e)
        assert t.fine_unit == 10 and t.tau == 10 << e
