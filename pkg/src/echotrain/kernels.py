"""Numba kernels for state-vector updates.

Everything here works on flat complex128 arrays indexed by basis state, or
on (dim, ncols) column blocks with the column index contiguous so the inner
loops vectorize.  Bit j of the basis index is spin j (set bit = spin down).

These are private helpers: no validation, no allocation beyond scalars, all
in-place.  The engine owns buffer management and picks which kernel runs.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, fastmath=True)


@njit(**_JIT)
def phase_multiply(state, phases):
    for m in range(state.shape[0]):
        state[m] *= phases[m]


@njit(**_JIT)
def phase_multiply_cols(mat, phases):
    dim, ncols = mat.shape
    for m in range(dim):
        ph = phases[m]
        for c in range(ncols):
            mat[m, c] *= ph


@njit(**_JIT)
def scale_diag_cols(out, x, diag):
    dim, ncols = x.shape
    for m in range(dim):
        d = diag[m]
        for c in range(ncols):
            out[m, c] = d * x[m, c]


@njit(**_JIT)
def qubit_apply(state, bit, u00, u01, u10, u11):
    # rows of u act on (up, down) = (bit clear, bit set)
    step = 1 << bit
    dim = state.shape[0]
    for base in range(0, dim, step << 1):
        for i in range(base, base + step):
            a = state[i]
            b = state[i + step]
            state[i] = u00 * a + u01 * b
            state[i + step] = u10 * a + u11 * b


@njit(**_JIT)
def qubit_apply_cols(mat, bit, u00, u01, u10, u11):
    step = 1 << bit
    dim, ncols = mat.shape
    for base in range(0, dim, step << 1):
        for i in range(base, base + step):
            for c in range(ncols):
                a = mat[i, c]
                b = mat[i + step, c]
                mat[i, c] = u00 * a + u01 * b
                mat[i + step, c] = u10 * a + u11 * b


@njit(**_JIT)
def reversal_phase(state, phase):
    # global spin flip: index bit-complement is a full reversal
    dim = state.shape[0]
    for m in range(dim >> 1):
        p = dim - 1 - m
        a = state[m]
        state[m] = phase * state[p]
        state[p] = phase * a


@njit(**_JIT)
def reversal_phase_cols(mat, phase):
    dim, ncols = mat.shape
    for m in range(dim >> 1):
        p = dim - 1 - m
        for c in range(ncols):
            a = mat[m, c]
            mat[m, c] = phase * mat[p, c]
            mat[p, c] = phase * a


@njit(**_JIT)
def pair_flip_rot(state, mask_i, mask_j, c, s):
    # exp(-i phi sx) on the {down-up, up-down} pair block, c/s = cos/sin(phi)
    pair_mask = mask_i | mask_j
    dim = state.shape[0]
    for m in range(dim):
        if (m & mask_i) != 0 and (m & mask_j) == 0:
            p = m ^ pair_mask
            a = state[m]
            b = state[p]
            state[m] = c * a - 1j * (s * b)
            state[p] = c * b - 1j * (s * a)


@njit(**_JIT)
def pair_flip_rot_cols(mat, mask_i, mask_j, c, s):
    pair_mask = mask_i | mask_j
    dim, ncols = mat.shape
    for m in range(dim):
        if (m & mask_i) != 0 and (m & mask_j) == 0:
            p = m ^ pair_mask
            for col in range(ncols):
                a = mat[m, col]
                b = mat[p, col]
                mat[m, col] = c * a - 1j * (s * b)
                mat[p, col] = c * b - 1j * (s * a)


@njit(**_JIT)
def hop_add_cols(out, x, masks, weights):
    # out += hop part of H x on a column block
    dim, ncols = x.shape
    for p in range(masks.shape[0]):
        mask = masks[p]
        w = weights[p]
        for m in range(dim):
            sel = m & mask
            if sel != 0 and sel != mask:
                mp = m ^ mask
                for c in range(ncols):
                    out[m, c] += w * x[mp, c]


@njit(**_JIT)
def hmatvec(out, x, diag, masks, weights):
    # out = H x with H = diag + flip-flop hops (amplitude weights[p] between
    # m and m ^ masks[p] when exactly one of the two bits is set)
    dim = x.shape[0]
    for m in range(dim):
        out[m] = diag[m] * x[m]
    for p in range(masks.shape[0]):
        mask = masks[p]
        w = weights[p]
        for m in range(dim):
            sel = m & mask
            if sel != 0 and sel != mask:
                out[m] += w * x[m ^ mask]


@njit(**_JIT)
def cheb_step(out, x, prev, diag, masks, weights):
    # Chebyshev recurrence T_next = 2 H' x - prev, H' = diag + hops (already
    # scaled by 1/bound by the caller)
    dim = x.shape[0]
    for m in range(dim):
        out[m] = 2.0 * (diag[m] * x[m]) - prev[m]
    for p in range(masks.shape[0]):
        mask = masks[p]
        w2 = 2.0 * weights[p]
        for m in range(dim):
            sel = m & mask
            if sel != 0 and sel != mask:
                out[m] += w2 * x[m ^ mask]


@njit(**_JIT)
def cheb_step_cols(out, x, prev, diag, masks, weights):
    dim, ncols = x.shape
    for m in range(dim):
        d = 2.0 * diag[m]
        for c in range(ncols):
            out[m, c] = d * x[m, c] - prev[m, c]
    for p in range(masks.shape[0]):
        mask = masks[p]
        w2 = 2.0 * weights[p]
        for m in range(dim):
            sel = m & mask
            if sel != 0 and sel != mask:
                mp = m ^ mask
                for c in range(ncols):
                    out[m, c] += w2 * x[mp, c]


@njit(**_JIT)
def axpy(y, x, a):
    for m in range(y.shape[0]):
        y[m] += a * x[m]


@njit(**_JIT)
def axpy_cols(y, x, a):
    dim, ncols = y.shape
    for m in range(dim):
        for c in range(ncols):
            y[m, c] += a * x[m, c]


@njit(**_JIT)
def sqnorm(x):
    acc = 0.0
    for m in range(x.shape[0]):
        v = x[m]
        acc += v.real * v.real + v.imag * v.imag
    return acc


@njit(**_JIT)
def sqnorm_cols(x):
    dim, ncols = x.shape
    acc = 0.0
    for m in range(dim):
        for c in range(ncols):
            v = x[m, c]
            acc += v.real * v.real + v.imag * v.imag
    return acc


@njit(**_JIT)
def apply_mx(out, x, n_spins):
    # out = (sum_j S_jx) x
    dim = x.shape[0]
    for m in range(dim):
        out[m] = 0.0j
    for j in range(n_spins):
        step = 1 << j
        for m in range(dim):
            out[m] += 0.5 * x[m ^ step]


@njit(**_JIT)
def apply_my(out, x, n_spins):
    dim = x.shape[0]
    for m in range(dim):
        out[m] = 0.0j
    for j in range(n_spins):
        step = 1 << j
        for m in range(dim):
            v = 0.5j * x[m ^ step]
            if (m & step) == 0:
                out[m] -= v
            else:
                out[m] += v


@njit(**_JIT)
def apply_mx_cols(out, x, n_spins):
    dim, ncols = x.shape
    for m in range(dim):
        for c in range(ncols):
            out[m, c] = 0.0j
    for j in range(n_spins):
        step = 1 << j
        for m in range(dim):
            mp = m ^ step
            for c in range(ncols):
                out[m, c] += 0.5 * x[mp, c]


@njit(**_JIT)
def apply_my_cols(out, x, n_spins):
    dim, ncols = x.shape
    for m in range(dim):
        for c in range(ncols):
            out[m, c] = 0.0j
    for j in range(n_spins):
        step = 1 << j
        for m in range(dim):
            mp = m ^ step
            sign = -1.0 if (m & step) == 0 else 1.0
            for c in range(ncols):
                out[m, c] += 0.5j * sign * x[mp, c]


@njit(**_JIT)
def dot_mx(phi, psi, n_spins):
    # <phi| sum_j S_jx |psi>
    acc = 0.0j
    dim = phi.shape[0]
    for j in range(n_spins):
        step = 1 << j
        for m in range(dim):
            acc += np.conj(phi[m]) * psi[m ^ step]
    return 0.5 * acc


@njit(**_JIT)
def dot_my(phi, psi, n_spins):
    acc = 0.0j
    dim = phi.shape[0]
    for j in range(n_spins):
        step = 1 << j
        for m in range(dim):
            v = np.conj(phi[m]) * psi[m ^ step]
            if (m & step) == 0:
                acc -= 1j * v
            else:
                acc += 1j * v
    return 0.5 * acc


@njit(**_JIT)
def dot_diag(phi, psi, diag):
    acc = 0.0j
    for m in range(phi.shape[0]):
        acc += np.conj(phi[m]) * (diag[m] * psi[m])
    return acc


@njit(cache=True)
def zvalues(n_spins, out):
    # diagonal of sum_j S_jz: (n_up - n_down)/2
    dim = out.shape[0]
    for m in range(dim):
        cnt = 0
        mm = m
        while mm != 0:
            cnt += mm & 1
            mm >>= 1
        out[m] = 0.5 * n_spins - cnt
    return out


@njit(cache=True)
def diag_energies(j, h, out):
    # E[m] built by single-bit recursion: clearing the lowest set bit gives a
    # parent whose energy is already known; the delta is the cost of flipping
    # that spin from up to down in the parent configuration
    n = h.shape[0]
    dim = out.shape[0]
    e0 = 0.0
    for k in range(n):
        e0 += 0.5 * h[k]
    for a in range(n):
        for b in range(a + 1, n):
            e0 += 0.25 * j[a, b]
    out[0] = e0
    for m in range(1, dim):
        k = 0
        while ((m >> k) & 1) == 0:
            k += 1
        mp = m ^ (1 << k)
        delta = -h[k]
        for q in range(n):
            if q != k:
                sq = 0.5 if ((mp >> q) & 1) == 0 else -0.5
                delta -= j[k, q] * sq
        out[m] = out[mp] + delta
    return out
