"""Numba kernels for basis enumeration and sector-restricted operator assembly.

Patterns are int64 bitsets (bit i set = atom i excited). All kernels take
the precomputed Pascal triangle ``comb[n, k] = C(n, k)`` and the sector
offset table of the restricted basis, so ranking is O(n_atoms) without
hash lookups.
"""

import numba
import numpy as np

_ONE = np.int64(1)


@numba.njit(cache=True)
def popcount(x):
    c = 0
    while x:
        x &= x - _ONE
        c += 1
    return c


@numba.njit(cache=True)
def fill_patterns(n_atoms, n_max, out):
    """Enumerate patterns ordered by excitation number, then by value."""
    pos = 0
    out[pos] = 0
    pos += 1
    limit = _ONE << n_atoms
    for k in range(1, n_max + 1):
        v = (_ONE << k) - _ONE
        while v < limit:
            out[pos] = v
            pos += 1
            c = v & (-v)
            r = v + c
            v = r | (((v ^ r) >> 2) // c)
    return pos


@numba.njit(cache=True)
def rank_pattern(pattern, comb, offsets):
    """Index of ``pattern`` under the (excitation count, value) order."""
    k = 0
    r = np.int64(0)
    pos = 0
    p = pattern
    while p:
        if p & _ONE:
            k += 1
            r += comb[pos, k]
        p >>= 1
        pos += 1
    return offsets[k] + r


@numba.njit(cache=True)
def rank_many(patterns, comb, offsets, out):
    for b in range(patterns.shape[0]):
        out[b] = rank_pattern(patterns[b], comb, offsets)


@numba.njit(cache=True)
def hamiltonian_coo(patterns, comb, offsets, kernel, n_atoms):
    """COO triplets of sum_ij kernel[i,j] sigma_eg^i sigma_ge^j on the basis."""
    dim = patterns.shape[0]
    nnz = 0
    for b in range(dim):
        k = popcount(patterns[b])
        if k > 0:
            nnz += 1 + k * (n_atoms - k)
    rows = np.empty(nnz, np.int64)
    cols = np.empty(nnz, np.int64)
    vals = np.empty(nnz, np.complex128)
    idx = 0
    for b in range(dim):
        p = patterns[b]
        k = popcount(p)
        if k == 0:
            continue
        diag = 0.0 + 0.0j
        for j in range(n_atoms):
            if (p >> j) & _ONE:
                diag += kernel[j, j]
        rows[idx] = b
        cols[idx] = b
        vals[idx] = diag
        idx += 1
        for j in range(n_atoms):
            if not (p >> j) & _ONE:
                continue
            q = p ^ (_ONE << j)
            for i in range(n_atoms):
                if (p >> i) & _ONE:
                    continue
                t = q | (_ONE << i)
                rows[idx] = rank_pattern(t, comb, offsets)
                cols[idx] = b
                vals[idx] = kernel[i, j]
                idx += 1
    return rows, cols, vals


@numba.njit(cache=True)
def transfer_apply(i, j, patterns, comb, offsets, amps, out):
    """Accumulate sigma_eg^i sigma_ge^j |amps> into ``out`` (i == j acts as n_i)."""
    dim = patterns.shape[0]
    if i == j:
        for b in range(dim):
            if (patterns[b] >> j) & _ONE:
                out[b] += amps[b]
        return
    for b in range(dim):
        p = patterns[b]
        if ((p >> j) & _ONE) and not ((p >> i) & _ONE):
            t = (p ^ (_ONE << j)) | (_ONE << i)
            out[rank_pattern(t, comb, offsets)] += amps[b]


@numba.njit(cache=True)
def lowering_apply(weights, n_atoms, patterns, comb, offsets, amps, out):
    """Accumulate (sum_i weights[i] sigma_ge^i) |amps> into ``out``."""
    dim = patterns.shape[0]
    for b in range(dim):
        a = amps[b]
        if a == 0:
            continue
        p = patterns[b]
        for j in range(n_atoms):
            if ((p >> j) & _ONE) and weights[j] != 0:
                t = p ^ (_ONE << j)
                out[rank_pattern(t, comb, offsets)] += weights[j] * a


@numba.njit(cache=True)
def lowering_coo(weights, n_atoms, patterns, comb, offsets):
    """COO triplets of the weighted lowering operator on the basis."""
    dim = patterns.shape[0]
    nnz = 0
    for b in range(dim):
        p = patterns[b]
        for j in range(n_atoms):
            if ((p >> j) & _ONE) and weights[j] != 0:
                nnz += 1
    rows = np.empty(nnz, np.int64)
    cols = np.empty(nnz, np.int64)
    vals = np.empty(nnz, np.complex128)
    idx = 0
    for b in range(dim):
        p = patterns[b]
        for j in range(n_atoms):
            if ((p >> j) & _ONE) and weights[j] != 0:
                rows[idx] = rank_pattern(p ^ (_ONE << j), comb, offsets)
                cols[idx] = b
                vals[idx] = weights[j]
                idx += 1
    return rows, cols, vals


@numba.njit(cache=True)
def populations_accum(patterns, amps, n_atoms, out):
    """Add |amps|^2 weights onto per-site excitation populations."""
    dim = patterns.shape[0]
    for b in range(dim):
        a = amps[b]
        w = a.real * a.real + a.imag * a.imag
        if w == 0.0:
            continue
        p = patterns[b]
        j = 0
        while p:
            if p & _ONE:
                out[j] += w
            p >>= 1
            j += 1


@numba.njit(cache=True)
def populations_diag_accum(patterns, diag, n_atoms, out):
    """Same as populations_accum but for real density-matrix diagonals."""
    dim = patterns.shape[0]
    for b in range(dim):
        w = diag[b]
        if w == 0.0:
            continue
        p = patterns[b]
        j = 0
        while p:
            if p & _ONE:
                out[j] += w
            p >>= 1
            j += 1


@numba.njit(cache=True)
def split_ranks(patterns, cut, comb_l, off_l, comb_r, off_r, left_idx, right_idx, left_k):
    """Left/right sub-basis ranks and left excitation count of each pattern."""
    mask = (_ONE << cut) - _ONE
    for b in range(patterns.shape[0]):
        p = patterns[b]
        lp = p & mask
        rp = p >> cut
        left_idx[b] = rank_pattern(lp, comb_l, off_l)
        right_idx[b] = rank_pattern(rp, comb_r, off_r)
        left_k[b] = popcount(lp)
