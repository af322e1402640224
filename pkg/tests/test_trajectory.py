import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mwglmb.core import AssociationHistory, AssociationMap, Label
from mwglmb.models import Models, MotionModel, default_scenario_models
from mwglmb.trajectory import (TrajectoryCache, TrajectoryError, birth_update, death_weight,
                               eta, smooth, survival_update, terminate)
from conftest import small_models
from oracles import label_log_weight, quad_detection, quad_expectation, rts_batch


def _scans(rng, n_scans, m):
    return [np.zeros((0, 2))] + [rng.uniform(-60, 60, size=(m, 2)) for _ in range(n_scans)]


def test_birth_weight_matches_quadrature():
    motion, birth, sensor = default_scenario_models()
    comp = birth.component(2)
    z = comp.mean[[0, 2]] + np.array([20.0, -35.0])
    node, w = birth_update(comp, sensor, z[None, :], 1, k=4)
    ref = math.log(comp.r_birth) + math.log(quad_detection(sensor, z, comp.mean, comp.cov))
    assert w == pytest.approx(ref, rel=1e-6)
    assert node.label == Label(4, 2) and node.s == node.t == 4


def test_birth_misdetected_keeps_prior():
    motion, birth, sensor = default_scenario_models()
    comp = birth.component(1)
    node, w = birth_update(comp, sensor, np.zeros((0, 2)), 0, k=1)
    assert np.array_equal(node.mean, comp.mean)
    assert w == pytest.approx(math.log(0.03 * 0.7))


def test_survival_weight_matches_quadrature():
    motion, birth, sensor = default_scenario_models()
    comp = birth.component(1)
    z0 = comp.mean[[0, 2]] + 10.0
    node, _ = birth_update(comp, sensor, z0[None, :], 1, k=1)
    m_pred = motion.F @ node.mean
    P_pred = motion.F @ node.cov @ motion.F.T + motion.Q
    z1 = sensor.H @ m_pred + np.array([-25.0, 40.0])
    nxt, w = survival_update(node, motion, sensor, z1[None, :], 1, k=2)
    ref = math.log(motion.p_survive * quad_detection(sensor, z1, m_pred, P_pred))
    assert w == pytest.approx(ref, rel=1e-6)
    assert nxt.log_weight == pytest.approx(node.log_weight + w)
    assert nxt.parent is node


def test_survival_requires_consecutive_scan():
    motion, birth, sensor = default_scenario_models()
    node, _ = birth_update(birth.component(1), sensor, np.zeros((0, 2)), 0, k=1)
    with pytest.raises(TrajectoryError):
        survival_update(node, motion, sensor, np.zeros((0, 2)), 0, k=3)
    dead = terminate(node, motion)
    with pytest.raises(TrajectoryError):
        survival_update(dead, motion, sensor, np.zeros((0, 2)), 0, k=2)


def test_state_dependent_death_weight_matches_quadrature():
    motion, birth, sensor = default_scenario_models()
    node, _ = birth_update(birth.component(1), sensor, np.zeros((0, 2)), 0, k=1)

    def p_s(x):
        return 0.9 * math.exp(-(x[0] ** 2 + x[2] ** 2) / (2 * 600.0**2))

    got = death_weight(node, p_s)
    ref = math.log(quad_expectation(
        lambda y: 1.0 - 0.9 * math.exp(-(y @ y) / (2 * 600.0**2)), node.mean, node.cov,
        sensor.H))
    assert got == pytest.approx(ref, rel=1e-6)
    assert death_weight(node, motion) == pytest.approx(math.log(0.05))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(0, 3), min_size=1, max_size=6),
       st.booleans())
def test_cached_weight_matches_textbook_filter(seed, seq, dies):
    models = small_models()
    Z = _scans(np.random.default_rng(seed), len(seq) + 1, 3)
    seq = tuple(seq) + ((-1,) if dies else ())
    ell = Label(1, 1)
    cache = TrajectoryCache(models, measurements=Z)
    assert cache.log_weight(ell, seq) == pytest.approx(
        label_log_weight(models, Z, ell, seq), rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.tuples(st.integers(1, 2),
                                                  st.lists(st.integers(0, 2), min_size=1,
                                                           max_size=5)),
                                        min_size=1, max_size=12))
def test_cache_eviction_is_transparent(seed, queries):
    models = small_models()
    Z = _scans(np.random.default_rng(seed), 6, 2)
    big = TrajectoryCache(models, capacity=10_000, measurements=Z)
    tiny = TrajectoryCache(models, capacity=2, measurements=Z)
    for iota, seq in queries:
        ell = Label(1, iota)
        assert tiny.log_weight(ell, tuple(seq)) == big.log_weight(ell, tuple(seq))
        assert len(tiny) <= 2


def test_continuing_after_death_is_an_error():
    cache = TrajectoryCache(small_models(), measurements=_scans(np.random.default_rng(0), 3, 1))
    with pytest.raises(TrajectoryError):
        cache.lookup(Label(1, 1), (0, -1, 0))


def test_eta_cases():
    models = small_models()
    Z = _scans(np.random.default_rng(1), 3, 2)
    cache = TrajectoryCache(models, measurements=Z)
    a, b = Label(1, 1), Label(1, 2)
    maps = [AssociationMap(0, (), 0),
            AssociationMap(1, {a: 1, b: -1}, 2),
            AssociationMap(2, {a: 0, Label(2, 1): -1, Label(2, 2): -1}, 2),
            AssociationMap(3, {a: -1, Label(3, 1): 2, Label(3, 2): -1}, 2)]
    g = AssociationHistory(maps)
    assert eta(g, b, 1, cache) == pytest.approx(math.log(0.7))
    assert eta(g, a, 1, cache) == pytest.approx(label_log_weight(models, Z, a, (1,)))
    assert eta(g, a, 2, cache) == pytest.approx(
        label_log_weight(models, Z, a, (1, 0)) - label_log_weight(models, Z, a, (1,)))
    assert eta(g, a, 3, cache) == pytest.approx(math.log(0.1))
    with pytest.raises(TrajectoryError):
        eta(g, b, 2, cache)


def test_rts_matches_batch_solution():
    base = small_models()
    # the batch oracle needs an invertible process noise
    motion = MotionModel(base.motion.F, base.motion.Q + 0.5 * np.eye(4), 0.9)
    models = Models(motion, base.birth, base.sensor)
    _, birth, sensor = models
    rng = np.random.default_rng(5)
    n = 7
    Z = _scans(rng, n, 1)
    seq = (1, 0, 1, 1, 0, 0, 1)
    cache = TrajectoryCache(models, measurements=Z)
    node = cache.lookup(Label(1, 1), seq)
    smoothed = smooth(node, motion)
    comp = birth.component(1)
    ref = rts_batch(motion, sensor, comp.mean, comp.cov,
                    [Z[1 + i][0] if a else None for i, a in enumerate(seq)])
    assert np.allclose([g.mean for g in smoothed], ref, atol=1e-8)
    # the last smoothed density is the filtered one
    assert np.allclose(smoothed[-1].mean, node.mean)
