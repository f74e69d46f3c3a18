import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdtm import fixtures
from tdtm.kernel import Kernel
from tdtm.model import COALESCED, MULTICLASS, TmModel, random_model
from tdtm.reference import argmax_class, cotm_sums, eval_clauses, infer
from tdtm.timedomain import (LOD, CoarseFine, RacePath, TimeDomainConfig, TimingConfigError, argmin_class,
                             coarse_fine_delay, cotm_race_delays, dcde_delay, decode_code, hamming_race_delays,
                             ideal_delays, lod_extract, lod_reconstruct, race_agrees, resolve_config,
                             split_signed, vernier_tdc)

CFG = TimeDomainConfig()


def lod_oracle(v, e):
    """Leading-one extraction on the binary string."""
    if v == 0:
        return 0, 0
    bits = bin(v)[2:]
    k = len(bits) - 1
    rest = bits[1:]
    f = int((rest + "0" * e)[:e], 2) if e else 0
    return k, f


def test_lod_examples():
    assert lod_extract(13, 2, 8) == CoarseFine(3, 2)
    assert lod_extract(4, 2, 8) == CoarseFine(2, 0)
    assert lod_extract(0, 2, 8) == CoarseFine(0, 0)
    with pytest.raises(ValueError):
        lod_extract(256, 2, 8)


def test_lod_matches_string_oracle():
    for e in (0, 1, 2, 3, 4, 6, 8):
        for v in range(0, 1 << 12):
            assert tuple(lod_extract(v, e, 16)) == lod_oracle(v, e)


def test_reconstruct_examples():
    assert lod_reconstruct(CoarseFine(3, 2), 2) == 12
    assert lod_reconstruct(CoarseFine(2, 0), 2) == 4
    assert lod_reconstruct(CoarseFine(0, 0), 2) == 0


@settings(max_examples=300)
@given(st.integers(1, 2**16 - 1), st.sampled_from([1, 2, 3, 4, 5, 6]))
def test_reconstruction_bound(v, e):
    r = lod_reconstruct(lod_extract(v, e, 16), e)
    assert v * (1 - 2.0 ** -e) < r <= v


def test_coarse_fine_delay_examples():
    assert coarse_fine_delay(CoarseFine(3, 2), CFG) == 500
    assert coarse_fine_delay(CoarseFine(0, 0), CFG) == 0
    assert coarse_fine_delay(CoarseFine(1, 15), CFG) == 310


@pytest.mark.parametrize("e", [2, 4, 6])
def test_coarse_fine_delay_monotone(e):
    cfg = TimeDomainConfig(tau=10 << e, e=e)
    d = [coarse_fine_delay(lod_extract(v, e, 16), cfg) for v in range(1 << 12)]
    assert all(a <= b for a, b in zip(d, d[1:]))


def test_config_validation():
    with pytest.raises(TimingConfigError):
        TimeDomainConfig(tau=160, e=6)
    with pytest.raises(TimingConfigError):
        TimeDomainConfig(launch_skew=-1)
    with pytest.raises(TimingConfigError):
        TimeDomainConfig(mode="fast")
    assert TimeDomainConfig(tau=640, e=6).fine_unit == 10


def test_split_signed_examples():
    assert split_signed([2, -1, 3], [1, 1, 0]) == (1, 2)
    assert split_signed([2, -1, 3], [0, 0, 0]) == (0, 0)
    assert split_signed([-4], [1]) == (4, 0)


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(-7, 7), st.integers(0, 1)), min_size=1, max_size=20))
def test_split_signed_exact(pairs):
    w, c = zip(*pairs)
    S, M = split_signed(w, c)
    assert S >= 0 and M >= 0
    assert M - S == int(np.dot(w, c))


def test_vernier_examples():
    assert vernier_tdc(100, 100, 10) == 0
    assert vernier_tdc(0, 95, 10) == 9
    assert vernier_tdc(25, 0, 10) == -2


def test_dcde_examples():
    cfg = replace(CFG, dcde_base=2000)
    assert dcde_delay(0, cfg) == 2000
    assert dcde_delay(9, cfg) == 1910
    assert dcde_delay(-2, cfg) == 2020
    with pytest.raises(TimingConfigError):
        dcde_delay(200, cfg)
    with pytest.raises(TimingConfigError):
        dcde_delay(0, CFG)


def test_ideal_example():
    cfg = replace(CFG, dcde_base=2000)
    d = ideal_delays([5, 2, -1], cfg)
    assert d.tolist() == [1950, 1980, 2010]
    assert argmin_class(d) == 0 == argmax_class([5, 2, -1])


def test_hamming_examples():
    m = TmModel(MULTICLASS, 1, 4, 2, np.ones((8, 2), dtype=np.uint8))
    cv = np.array([[1, 0, 1, 0], [0, 1, 0, 1]])
    assert hamming_race_delays(m, cv, CFG).tolist() == [0, 4 * CFG.tau_hamming]
    equal = np.array([[1, 1, 0, 0], [0, 0, 1, 1]])
    d = hamming_race_delays(m, equal, CFG)
    assert d[0] == d[1]


def test_decode_lod_is_monotone_and_sign_symmetric():
    cfg = replace(CFG, decode=LOD)
    codes = [decode_code(dc, cfg) for dc in range(-400, 401)]
    assert all(a <= b for a, b in zip(codes, codes[1:]))
    assert all(decode_code(-dc, cfg) == -decode_code(dc, cfg) for dc in range(400))
    assert decode_code(0, cfg) == 0


def test_resolve_config_sizes_dcde_base():
    m = fixtures.model(fixtures.IRIS_COALESCED)
    cfg = resolve_config(m, CFG)
    assert cfg.dcde_base is not None
    with pytest.raises(TimingConfigError):
        resolve_config(m, replace(CFG, dcde_base=10))


def test_zero_interval_gives_base_delay():
    # a class whose positive and negative parts cancel
    m = TmModel(COALESCED, 1, 2, 1, np.ones((2, 2), dtype=np.uint8), weights=[[3, -3]])
    plan = cotm_race_delays(m, [1, 1], CFG)
    r = plan.classes[0]
    assert r.S == r.M == 3 and r.dc == 0
    assert r.delay == resolve_config(m, CFG).dcde_base


def test_single_class_always_wins():
    m = random_model(np.random.default_rng(3), COALESCED, 4, 6, 1)
    for mode in ("ideal", "architectural"):
        plan = cotm_race_delays(m, np.zeros(6, dtype=int), replace(CFG, mode=mode))
        assert plan.winner == 0


@pytest.mark.parametrize("name", fixtures.names("small_coalesced_"))
def test_ideal_ordering_exhaustive(name):
    m = fixtures.model(name)
    for x in itertools.product((0, 1), repeat=m.num_features):
        cv = eval_clauses(m, np.repeat(x, 2) ^ np.tile([0, 1], len(x)))
        plan = cotm_race_delays(m, cv, replace(CFG, mode="ideal"))
        assert plan.winner == argmax_class(cotm_sums(m, cv))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hamming_ordering_random(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, MULTICLASS, 8, 2 * int(rng.integers(1, 7)), int(rng.integers(1, 6)), include_p=0.2)
    res = infer(m, rng.integers(0, 2, 8))
    d = hamming_race_delays(m, res.clauses, CFG)
    assert argmin_class(d) == res.prediction
    # score identity: score = sum + C/2
    assert ((m.num_clauses - d // CFG.tau_hamming) == res.sums + m.num_clauses // 2).all()


def test_architectural_agreement_reported_not_assumed():
    # two close sums that the log compression cannot separate
    m = TmModel(COALESCED, 1, 3, 2, np.ones((3, 2), dtype=np.uint8), weights=[[7, 7, 3], [7, 7, 2]])
    cfg = TimeDomainConfig(tau=40, e=2)
    plan = cotm_race_delays(m, [1, 1, 1], cfg)
    assert [r.sum for r in plan.classes] == [17, 16]
    assert plan.arrivals[0] == plan.arrivals[1]
    assert race_agrees(plan)   # exact tie resolved to the low index, same as the oracle


@pytest.mark.parametrize("kind", ["hamming", "ideal", "architectural"])
def test_race_path_on_kernel_matches_plan(kind):
    name = fixtures.IRIS_MULTICLASS if kind == "hamming" else fixtures.IRIS_COALESCED
    m = fixtures.model(name)
    for s in fixtures.iris_samples():
        k = Kernel()
        go = k.signal("go")
        rp = RacePath(k, m, CFG, kind, go)
        rp.load(infer(m, s).clauses)
        k.schedule(go, 1, 100)
        k.run()
        got = [k.signals[r].last_transition - 100 for r in rp.race]
        assert got == rp.plan.arrivals.tolist()
        if kind == "architectural":
            assert [x["dc"] for x in rp.measured] == [c.dc for c in rp.plan.classes]
        # falling launch returns every race net to zero
        k.schedule(go, 0, k.now + 1)
        k.run()
        assert all(k.value(r) == 0 for r in rp.race)
