"""Compiled RK4 integrator for ``drho/dt = C * rho - i (Heff rho - rho Heff^dag) + sum_k L_k rho L_k^dag``.

``C * rho`` is an elementwise product carrying the dissipators of jump operators
that are diagonal in the joint basis; it is integrated exactly with an
integrating factor (Lawson RK4), so stiff dephasing does not limit the step.
With ``C = 0`` the scheme is classical RK4.

Operators come in CSR form; jump operators are stacked vertically, so rows
``k*n .. (k+1)*n - 1`` belong to ``L_k``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _csr_dense(data, indices, indptr, row0, r, out):
    n = r.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
        for p in range(indptr[row0 + i], indptr[row0 + i + 1]):
            c = data[p]
            k = indices[p]
            for j in range(n):
                out[i, j] += c * r[k, j]


@njit(cache=True)
def _rhs(hd, hi, hp, ld, li, lp, nops, r, out, a, b):
    n = r.shape[0]
    _csr_dense(hd, hi, hp, 0, r, a)
    for i in range(n):
        for j in range(n):
            out[i, j] = -1j * (a[i, j] - np.conj(a[j, i]))
    for k in range(nops):
        row0 = k * n
        _csr_dense(ld, li, lp, row0, r, b)
        # (L rho L^dag)[i, j] = sum_l (L rho)[i, l] conj(L[j, l])
        for i in range(n):
            for j in range(n):
                acc = 0.0j
                for p in range(lp[row0 + j], lp[row0 + j + 1]):
                    acc += b[i, li[p]] * np.conj(ld[p])
                out[i, j] += acc


@njit(cache=True)
def rk4_steps(hd, hi, hp, ld, li, lp, nops, c, rho, h, nsteps):
    """Advance ``rho`` (in place) by ``nsteps`` integrating-factor RK4 steps of size ``h``."""
    n = rho.shape[0]
    k1 = np.empty((n, n), dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    a = np.empty_like(k1)
    b = np.empty_like(k1)
    e_half = np.exp(0.5 * h * c)
    e_full = e_half * e_half
    for _ in range(nsteps):
        _rhs(hd, hi, hp, ld, li, lp, nops, rho, k1, a, b)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = e_half[i, j] * (rho[i, j] + 0.5 * h * k1[i, j])
        _rhs(hd, hi, hp, ld, li, lp, nops, tmp, k2, a, b)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = e_half[i, j] * rho[i, j] + 0.5 * h * k2[i, j]
        _rhs(hd, hi, hp, ld, li, lp, nops, tmp, k3, a, b)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = e_full[i, j] * rho[i, j] + h * e_half[i, j] * k3[i, j]
        _rhs(hd, hi, hp, ld, li, lp, nops, tmp, k4, a, b)
        for i in range(n):
            for j in range(n):
                rho[i, j] = e_full[i, j] * rho[i, j] + (h / 6.0) * (
                    e_full[i, j] * k1[i, j] + 2.0 * e_half[i, j] * (k2[i, j] + k3[i, j]) + k4[i, j]
                )
        # re-symmetrize: rho <- (rho + rho^dag) / 2
        for i in range(n):
            rho[i, i] = rho[i, i].real
            for j in range(i + 1, n):
                m = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
                rho[i, j] = m
                rho[j, i] = np.conj(m)
    return rho
