import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waveguide_mbl.basis import DensityMatrix, StateVector, build_basis, prepare_product
from waveguide_mbl.errors import DomainError
from waveguide_mbl.observables import (
    _dense_schmidt_sq,
    _side_basis,
    ancilla_population,
    half_chain_entropy,
    half_imbalance,
    left_half_sites,
    memory_parameter,
    max_entropy_bound,
    site_populations,
    total_population,
)
from oracles import embed_state, full_entropy, full_site_populations


def _random_state(basis, seed, sector=None):
    rng = np.random.default_rng(seed)
    amps = np.zeros(basis.dim, dtype=np.complex128)
    if sector is None:
        amps[:] = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    else:
        a, b = basis.sector_range(sector)
        amps[a:b] = rng.normal(size=b - a) + 1j * rng.normal(size=b - a)
    amps /= np.linalg.norm(amps)
    return StateVector(basis, amps)


def test_site_populations_basis_states():
    basis = build_basis(6, 2)
    state = prepare_product([3], basis)
    pops = site_populations(state)
    assert pops[3] == 1.0 and pops.sum() == 1.0

    uniform = np.zeros(basis.dim, dtype=np.complex128)
    a, b = basis.sector_range(1)
    uniform[a:b] = 1.0 / math.sqrt(6)
    pops = site_populations(StateVector(basis, uniform))
    assert np.allclose(pops, 1.0 / 6.0, atol=1e-14)


def test_site_populations_match_full_space_oracle():
    basis = build_basis(6, 2)
    state = _random_state(basis, seed=3)
    got = site_populations(state)
    expected = full_site_populations(embed_state(state.amplitudes, basis.patterns, 6), 6)
    assert np.allclose(got, expected, atol=1e-12)
    assert got.sum() == pytest.approx(total_population(got))


def test_site_populations_density_matrix():
    basis = build_basis(5, 2)
    state = _random_state(basis, seed=9)
    rho = DensityMatrix(basis, np.outer(state.amplitudes, state.amplitudes.conj()))
    assert np.allclose(site_populations(rho), site_populations(state), atol=1e-12)


def test_memory_parameter_limits():
    n, sites = 30, [5, 15, 25]
    pops = np.zeros(n)
    pops[sites] = 1.0
    assert memory_parameter(pops, sites, n) == pytest.approx(1.0)
    assert memory_parameter(np.full(n, 3 / n), sites, n) == pytest.approx(0.0, abs=1e-14)
    moved = np.full(n, 3 / (n - 3))
    moved[sites] = 0.0
    expected = -(3 / n) / (1 - 3 / n)
    assert memory_parameter(moved, sites, n) == pytest.approx(expected)
    with pytest.raises(DomainError):
        memory_parameter(pops, [], n)
    with pytest.raises(DomainError):
        memory_parameter(np.ones(4), [0, 1, 2, 3], 4)


def test_left_half_convention():
    assert left_half_sites(16) == list(range(8))
    assert left_half_sites(7) == list(range(4))  # odd: extra site goes left


def test_half_imbalance_values():
    pops = np.zeros(16)
    pops[:8] = 0.1
    assert half_imbalance(pops) == pytest.approx(1.0)
    pops = np.full(16, 0.2)
    assert half_imbalance(pops) == pytest.approx(0.0, abs=1e-14)
    assert half_imbalance(np.zeros(16)) is None


def test_half_imbalance_against_direct_sum():
    rng = np.random.default_rng(8)
    pops = rng.uniform(0, 1, size=16)
    direct = (pops[:8].sum() - pops[8:].sum()) / pops.sum()
    assert half_imbalance(pops) == pytest.approx(direct, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=2, max_value=40), st.integers(min_value=0, max_value=10_000))
def test_half_imbalance_bounded(n, seed):
    pops = np.random.default_rng(seed).uniform(0, 1, size=n)
    value = half_imbalance(pops)
    assert value is None or -1.0 - 1e-12 <= value <= 1.0 + 1e-12


def test_entropy_product_state_zero():
    basis = build_basis(10, 3)
    for sites in ([], [0], [2, 7], [1, 4, 9]):
        state = prepare_product(sites, basis)
        assert half_chain_entropy(state) == pytest.approx(0.0, abs=1e-12)


def test_entropy_bell_pair():
    basis = build_basis(8, 1)
    amps = np.zeros(basis.dim, dtype=np.complex128)
    amps[basis.rank(1 << 0)] = 1 / math.sqrt(2)
    amps[basis.rank(1 << 7)] = 1 / math.sqrt(2)
    state = StateVector(basis, amps)
    assert half_chain_entropy(state, cut=4) == pytest.approx(math.log(2.0), rel=1e-12)


@pytest.mark.parametrize("cut", [2, 4, 5])
def test_entropy_matches_full_space_oracle(cut):
    basis = build_basis(8, 3)
    for seed, sector in ((1, 3), (2, 2), (3, None)):
        state = _random_state(basis, seed=seed, sector=sector)
        got = half_chain_entropy(state, cut=cut)
        expected = full_entropy(embed_state(state.amplitudes, basis.patterns, 8), 8, cut)
        assert got == pytest.approx(expected, abs=1e-10)


def test_entropy_swap_symmetry():
    basis = build_basis(9, 3)
    state = _random_state(basis, seed=12, sector=3)
    for cut in (3, 4, 5):
        s_left = half_chain_entropy(state, cut=cut)
        s_right = _swapped_entropy(state, cut)
        assert s_left == pytest.approx(s_right, abs=1e-10)


def _swapped_entropy(state, cut):
    # reverse the atom order, then cut at n - cut
    basis = state.basis
    n = basis.n_atoms
    reversed_amps = np.zeros_like(state.amplitudes)
    for idx in range(basis.dim):
        p = int(basis.patterns[idx])
        q = sum(((p >> i) & 1) << (n - 1 - i) for i in range(n))
        reversed_amps[basis.rank(q)] = state.amplitudes[idx]
    return half_chain_entropy(StateVector(basis, reversed_amps), cut=n - cut)


def test_entropy_block_path_agrees_with_dense_path():
    basis = build_basis(10, 4)
    state = _random_state(basis, seed=21, sector=4)
    cut = 5
    fast = half_chain_entropy(state, cut=cut)
    left = _side_basis(cut, basis.n_max)
    right = _side_basis(basis.n_atoms - cut, basis.n_max)
    ssq = _dense_schmidt_sq(state, cut, left, right)
    ssq = ssq[ssq > 1e-12]
    dense = float(-np.sum(ssq * np.log(ssq)))
    assert fast == pytest.approx(dense, abs=1e-12)


def test_entropy_bound_and_errors():
    basis = build_basis(10, 3)
    state = _random_state(basis, seed=31)
    s = half_chain_entropy(state, cut=5)
    assert 0.0 <= s <= max_entropy_bound(basis, 5) + 1e-12
    with pytest.raises(DomainError):
        half_chain_entropy(state, cut=0)
    with pytest.raises(DomainError):
        half_chain_entropy(StateVector(basis, 2.0 * state.amplitudes))


def test_ancilla_population():
    basis = build_basis(6, 2)
    state = prepare_product([5], basis)
    assert ancilla_population(state, 5) == pytest.approx(1.0)
    assert ancilla_population(state, 0) == pytest.approx(0.0)
