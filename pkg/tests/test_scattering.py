import math

import numpy as np
import pytest

from waveguide_mbl.model import DEFAULT_SPACING, DisorderSpec, Geometry, sample_positions
from waveguide_mbl.scattering import (
    anderson_statistics,
    chain_transmittance,
    n_loc_linear,
    n_loc_saturated,
    single_atom_rt,
    steady_state_bloch,
)

from oracles import coupled_dipole_transmission


def test_single_atom_identities_on_grid():
    deltas = np.linspace(-10, 10, 100)
    for d in deltas:
        p = single_atom_rt(d)
        assert abs(p.t - (1.0 + p.r)) < 1e-14
        assert abs(abs(p.r) ** 2 + abs(p.t) ** 2 - 1.0) < 1e-12
    res = single_atom_rt(0.0)
    assert res.r == -1.0 and res.t == 0.0
    far = single_atom_rt(1e8)
    assert abs(far.r) < 1e-7 and abs(far.t - 1.0) < 1e-7


def test_chain_single_atom_consistency():
    geom = Geometry(1, DEFAULT_SPACING, np.array([DEFAULT_SPACING]))
    for d in (0.3, 0.5, 2.0):
        res = chain_transmittance(geom, d)
        assert res.T == pytest.approx(4 * d**2 / (1 + 4 * d**2), abs=1e-14)


def test_chain_resonant_blocking():
    geom = sample_positions(2, DEFAULT_SPACING, DisorderSpec.full(seed=1))
    res = chain_transmittance(geom, 0.0)
    assert res.T == 0.0 and res.log_T == -math.inf


@pytest.mark.parametrize("n", [2, 3, 5])
def test_chain_matches_coupled_dipole_oracle(n):
    for seed in (3, 4):
        geom = sample_positions(n, DEFAULT_SPACING, DisorderSpec.full(seed=seed))
        for delta in (0.4, 1.0, -1.7):
            res = chain_transmittance(geom, delta)
            oracle = abs(coupled_dipole_transmission(geom.positions, delta)) ** 2
            assert res.T == pytest.approx(oracle, rel=1e-12)


def test_deep_localization_log_form():
    # far beyond double-precision underflow of the direct product
    geom = sample_positions(4000, DEFAULT_SPACING, DisorderSpec.full(seed=6))
    res = chain_transmittance(geom, 0.2)
    assert res.rescaled
    assert np.isfinite(res.log_T) and res.log_T < -2000.0
    assert res.T == 0.0  # linear value underflows but is well-defined


def test_transfer_matrix_unimodular():
    from waveguide_mbl.scattering import _atom_transfer

    p = single_atom_rt(0.9)
    m = _atom_transfer(p.r, p.t)
    assert abs(np.linalg.det(m) - 1.0) < 1e-12


def test_anderson_ordered_is_deterministic():
    stats = anderson_statistics(20, DEFAULT_SPACING, 0.0, 1.3, 50, seed=5)
    assert stats.var_log_t == pytest.approx(0.0, abs=1e-20)


def test_anderson_mean_matches_formula():
    n = 50
    stats = anderson_statistics(n, DEFAULT_SPACING, 1.0, 1.0, 3000, seed=42)
    expected = -n / n_loc_linear(1.0).n_loc
    assert stats.mean_log_t == pytest.approx(expected, rel=0.1)
    assert stats.var_log_t > 0


def test_anderson_mean_scales_with_n():
    s1 = anderson_statistics(30, DEFAULT_SPACING, 1.0, 1.0, 2000, seed=9)
    s2 = anderson_statistics(60, DEFAULT_SPACING, 1.0, 1.0, 2000, seed=10)
    ratio = s2.mean_log_t / s1.mean_log_t
    err = 2.0 * (abs(s1.stderr_mean / s1.mean_log_t) + abs(s2.stderr_mean / s2.mean_log_t))
    assert ratio == pytest.approx(2.0, abs=max(4 * err, 0.1))


def test_n_loc_linear_values():
    assert n_loc_linear(0.0).n_loc == 0.0
    assert n_loc_linear(0.5).n_loc == pytest.approx(1.0 / math.log(2.0), rel=1e-12)
    grid = np.linspace(0.05, 5, 60)
    values = [n_loc_linear(d).n_loc for d in grid]
    assert all(b > a for a, b in zip(values, values[1:]))  # monotone in |delta|
    assert n_loc_linear(-0.5).n_loc == n_loc_linear(0.5).n_loc


def test_steady_state_bloch_values():
    p = steady_state_bloch(0.0, 1.0)
    assert p.rho_ee == pytest.approx(1.0 / 3.0, rel=1e-12)
    limit = steady_state_bloch(0.7, 1e6)
    assert limit.rho_ee == pytest.approx(0.5, abs=1e-6)
    assert limit.T == pytest.approx(1.0, abs=1e-6)
    linear = steady_state_bloch(0.8, 0.0)
    assert linear.T == pytest.approx(abs(single_atom_rt(0.8).t) ** 2, rel=1e-12)
    assert linear.rho_ee == 0.0
    # rho_ee < 1/2 strictly for any finite drive
    for omega in (0.1, 1.0, 10.0, 100.0):
        assert steady_state_bloch(1.0, omega).rho_ee < 0.5


def test_bloch_transmittance_monotone_in_drive():
    omegas = np.linspace(0, 10, 50)
    t_vals = [steady_state_bloch(1.0, w).T for w in omegas]
    assert all(b > a for a, b in zip(t_vals, t_vals[1:]))


def test_n_loc_saturated_values():
    # zero drive reduces to the linear result
    assert n_loc_saturated(1.0, 0.0).n_loc == pytest.approx(n_loc_linear(1.0).n_loc, rel=1e-12)
    # anchor: T = 64/65 at rho_ee = 3/8, delta = 1
    est = n_loc_saturated(1.0, 0.375)
    assert est.n_loc == pytest.approx(1.0 / math.log(65.0 / 64.0), rel=1e-12)
    assert 64.0 <= est.n_loc <= 66.0
    # derived: rho_ee = 1/4 gives omega^2 = 2.5, T = 24/25
    est = n_loc_saturated(1.0, 0.25)
    assert est.n_loc == pytest.approx(1.0 / math.log(25.0 / 24.0), rel=1e-12)
    assert est.n_loc == pytest.approx(24.5, abs=0.05)
    # delocalization sentinel
    assert math.isinf(n_loc_saturated(1.0, 0.5).n_loc)
    assert math.isinf(n_loc_saturated(1.0, 0.49999999).n_loc) or n_loc_saturated(1.0, 0.49999999).n_loc > 1e6


def test_n_loc_saturated_monotone_in_population():
    rhos = np.linspace(0.0, 0.45, 40)
    vals = [n_loc_saturated(1.0, r).n_loc for r in rhos]
    assert all(b > a for a, b in zip(vals, vals[1:]))
