import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waveguide_mbl.errors import DomainError
from waveguide_mbl.model import WaveguideVariant
from waveguide_mbl.revival import (
    RateCurve,
    RevivalConfig,
    count_revivals,
    interacting_dof,
    revival_experiment,
    revival_rate_ensemble,
)

from oracles import damped_cosine_revival_oracle


def _rabi_trace(t_max=300.0, dt=0.05, coupling=0.5):
    t = np.arange(0.0, t_max + 0.5 * dt, dt)
    return t, np.cos(coupling * t) ** 2


def test_constant_trace_no_revivals():
    t = np.linspace(0, 10, 101)
    assert count_revivals(t, np.full_like(t, 0.6), RevivalConfig()).count == 0


def test_rabi_reference_count_is_47():
    # cos^2(t/2) on [0, 300]: interior maxima at t = 2 pi n, n = 1..47
    t, y = _rabi_trace()
    trace = count_revivals(t, y, RevivalConfig())
    assert trace.count == 47
    expected = 2 * math.pi * np.arange(1, 48)
    assert np.max(np.abs(trace.accepted_times - expected)) < 0.05
    assert trace.cumulative[-1] == 47
    assert np.all(np.diff(trace.cumulative) >= 0)


def test_rabi_count_robust_to_sampling():
    for dt in (0.05, 0.025, 0.0125):
        t, y = _rabi_trace(dt=dt)
        assert count_revivals(t, y, RevivalConfig()).count == 47


def test_damped_cosine_matches_symbolic_oracle():
    oracle_times = damped_cosine_revival_oracle(300.0, q_min=0.4, threshold=0.25)
    t = np.arange(0.0, 300.0001, 0.05)
    trace = count_revivals(t, 0.5 + 0.4 * np.exp(-t / 50.0) * np.cos(t), RevivalConfig())
    assert trace.count == len(oracle_times) == 12
    assert np.max(np.abs(trace.accepted_times - np.array(oracle_times))) < 0.05


def test_counting_rejects_low_visibility_wiggles():
    # small ripples on a high baseline: peaks are high but Q is tiny
    t = np.linspace(0, 50, 2001)
    y = 0.6 + 0.01 * np.cos(t)
    assert count_revivals(t, y, RevivalConfig()).count == 0


def test_rejected_maximum_does_not_reset_reference():
    # early dip to 0.20, sub-threshold wiggle at 0.24 (always rejected),
    # shallow dip to 0.23, then a peak at 0.30: with the spec rule the
    # floor stays 0.20 (Q = 0.5, accepted); if the rejected wiggle were
    # allowed to reset the floor, Q would be 0.30/0.23 - 1 = 0.30 < 0.4
    t = np.linspace(0.0, 10.0, 1001)
    knots_t = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
    knots_y = [0.28, 0.20, 0.24, 0.23, 0.30, 0.22]
    y = np.interp(t, knots_t, knots_y)
    cfg = RevivalConfig(q_min=0.4, population_threshold=0.25)
    trace = count_revivals(t, y, cfg)
    assert trace.count == 1
    assert trace.accepted_times[0] == pytest.approx(8.0, abs=0.02)
    # the sensitivity switch resets at every detected maximum instead
    cfg_alt = RevivalConfig(q_min=0.4, population_threshold=0.25, reset_on_detected=True)
    assert count_revivals(t, y, cfg_alt).count == 0


def test_plateau_counts_once():
    t = np.linspace(0, 10, 101)
    y = np.zeros_like(t)
    y[30:34] = 0.8  # flat-topped peak
    trace = count_revivals(t, y, RevivalConfig())
    assert trace.count == 1
    assert trace.accepted_times[0] == pytest.approx(t[30])


def test_zero_running_minimum_accepts():
    t, y = _rabi_trace(t_max=20.0)
    y[y < 1e-12] = 0.0
    assert count_revivals(t, y, RevivalConfig()).count >= 3


def test_nonuniform_sampling_rejected():
    t = np.array([0.0, 0.1, 0.3, 0.4, 0.5])
    with pytest.raises(DomainError):
        count_revivals(t, np.ones(5), RevivalConfig())


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_counting_monotone_in_thresholds(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 30, 301)
    y = np.clip(
        0.5
        + 0.4 * np.sin(rng.uniform(0.5, 3.0) * t + rng.uniform(0, 6))
        + 0.15 * rng.standard_normal(t.size),
        0.0,
        1.0,
    )
    counts_q = [
        count_revivals(t, y, RevivalConfig(q_min=q)).count for q in (0.1, 0.4, 1.0, 3.0)
    ]
    assert all(b <= a for a, b in zip(counts_q, counts_q[1:]))
    counts_p = [
        count_revivals(t, y, RevivalConfig(population_threshold=p)).count
        for p in (0.05, 0.25, 0.6, 0.9)
    ]
    assert all(b <= a for a, b in zip(counts_p, counts_p[1:]))


def test_counting_deterministic():
    t, y = _rabi_trace(t_max=50.0)
    a = count_revivals(t, y, RevivalConfig())
    b = count_revivals(t, y, RevivalConfig())
    assert np.array_equal(a.accepted_times, b.accepted_times)


def test_rate_ensemble_and_rabi_limit():
    t, y = _rabi_trace()
    cum = count_revivals(t, y, RevivalConfig()).cumulative
    curve = revival_rate_ensemble(t, [cum, cum.copy()])
    assert math.isnan(curve.rate[0])
    # R(t) -> C / pi for the deterministic reference
    assert curve.rate[-1] == pytest.approx(0.5 / math.pi, rel=0.02)
    assert np.all(np.diff(curve.mean_cumulative) >= 0)
    # reordering traces leaves the mean untouched
    curve2 = revival_rate_ensemble(t, [cum.copy(), cum])
    assert np.array_equal(curve.mean_cumulative, curve2.mean_cumulative)


def test_interacting_dof_algebra():
    t = np.linspace(0, 10, 11)
    base = RateCurve(t, np.ones(11), np.zeros(11), np.full(11, 0.5), 1)
    same = interacting_dof(base, base)
    assert np.allclose(same, 0.0)
    halved = RateCurve(t, np.ones(11), np.zeros(11), np.full(11, 0.25), 1)
    assert np.allclose(interacting_dof(halved, base), 1.0 / 0.25 - 1.0 / 0.5)
    dead = RateCurve(t, np.zeros(11), np.zeros(11), np.zeros(11), 1)
    assert np.all(np.isnan(interacting_dof(dead, base)))
    with pytest.raises(DomainError):
        interacting_dof(base, RateCurve(t + 1.0, np.ones(11), np.zeros(11), np.ones(11), 1))


def test_unloaded_experiment_is_its_own_reference():
    # n_exc = 1 loads nothing, so O(t) vanishes identically where defined
    res = revival_experiment(
        8, 1, WaveguideVariant.HALF_HERMITIAN, seed=5, n_realizations=2, t_max=60.0
    )
    defined = np.isfinite(res.o_curve)
    assert np.allclose(res.o_curve[defined], 0.0, atol=1e-12)
    assert res.per_realization_counts == res.per_realization_counts_reference


def test_loaded_experiment_suppresses_revivals():
    res = revival_experiment(
        10,
        3,
        WaveguideVariant.HALF_HERMITIAN,
        seed=11,
        n_realizations=4,
        t_max=120.0,
        loaded_sites=[0, 3],
    )
    assert sum(res.per_realization_counts) < sum(res.per_realization_counts_reference)
    late = np.isfinite(res.o_curve) & (res.times > 60.0)
    assert np.nanmean(res.o_curve[late]) > 0.0
