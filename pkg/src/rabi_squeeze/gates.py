"""Exact Rabi gates ``exp(i u P sigma_x)`` and ``exp(i v X sigma_y)``.

Both generators are diagonalized once per cutoff; a gate for any parameter is
then ``V diag(exp(i theta lambda)) V^dagger``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotHermitian
from .hilbert import SIGMA_X, SIGMA_Y, FockConfig, quadratures


@dataclass(frozen=True)
class EigenCache:
    """Eigendecomposition ``H = V diag(eigvals) V^dagger`` of a fixed Hermitian generator."""

    basis: np.ndarray
    eigvals: np.ndarray

    @classmethod
    def from_hermitian(cls, h, tol: float = 1e-12) -> "EigenCache":
        h = np.asarray(h)
        if not np.max(np.abs(h - h.conj().T), initial=0.0) < tol:
            raise NotHermitian("generator is not Hermitian")
        eigvals, basis = np.linalg.eigh(h)
        err = np.max(np.abs((basis * eigvals) @ basis.conj().T - h), initial=0.0)
        if err > 1e-9:
            raise ArithmeticError(f"eigendecomposition reconstruction error {err:.3g}")
        basis.setflags(write=False)
        eigvals.setflags(write=False)
        return cls(basis, eigvals)

    @property
    def dim(self) -> int:
        return self.eigvals.shape[0]

    def expi(self, theta: float) -> np.ndarray:
        """Dense unitary ``exp(i theta H)``."""
        if theta == 0.0:
            return np.eye(self.dim, dtype=complex)
        return (self.basis * np.exp(1j * theta * self.eigvals)) @ self.basis.conj().T

    def apply(self, theta: float, psi: np.ndarray) -> np.ndarray:
        """``exp(i theta H) @ psi`` for a vector or a stack of column vectors."""
        if theta == 0.0:
            return psi
        phase = np.exp(1j * theta * self.eigvals)
        coeffs = self.basis.conj().T @ psi
        if coeffs.ndim == 1:
            return self.basis @ (phase * coeffs)
        return self.basis @ (phase[:, None] * coeffs)


def expi_hermitian(h, theta: float) -> np.ndarray:
    """``exp(i theta H)`` for Hermitian ``H`` via eigendecomposition."""
    h = np.asarray(h)
    if theta == 0.0:
        if not np.max(np.abs(h - h.conj().T), initial=0.0) < 1e-12:
            raise NotHermitian("generator is not Hermitian")
        return np.eye(h.shape[0], dtype=complex)
    return EigenCache.from_hermitian(h).expi(theta)


def p_sigma_x(cfg: FockConfig) -> np.ndarray:
    """Joint generator ``sigma_x (x) P``."""
    _, p = quadratures(cfg)
    return np.kron(SIGMA_X, p)


def x_sigma_y(cfg: FockConfig) -> np.ndarray:
    """Joint generator ``sigma_y (x) X``."""
    x, _ = quadratures(cfg)
    return np.kron(SIGMA_Y, x)


@dataclass(frozen=True)
class GateSet:
    """Cached eigendecompositions of both Rabi generators at one cutoff."""

    cfg: FockConfig
    u_cache: EigenCache
    v_cache: EigenCache

    def rabi_u(self, u: float) -> np.ndarray:
        return self.u_cache.expi(u)

    def rabi_v(self, v: float) -> np.ndarray:
        return self.v_cache.expi(v)

    def apply_u(self, u: float, psi: np.ndarray) -> np.ndarray:
        return self.u_cache.apply(u, psi)

    def apply_v(self, v: float, psi: np.ndarray) -> np.ndarray:
        return self.v_cache.apply(v, psi)


@lru_cache(maxsize=8)
def gate_set(cfg: FockConfig) -> GateSet:
    return GateSet(
        cfg,
        EigenCache.from_hermitian(p_sigma_x(cfg)),
        EigenCache.from_hermitian(x_sigma_y(cfg)),
    )


def rabi_u(u: float, cfg: FockConfig) -> np.ndarray:
    """``exp(i u P sigma_x)``: displaces X by ``-u`` on ``|+>`` and by ``+u`` on ``|->``."""
    return gate_set(cfg).rabi_u(u)


def rabi_v(v: float, cfg: FockConfig) -> np.ndarray:
    """``exp(i v X sigma_y)``: displaces P by ``+v`` on ``|+i>`` and by ``-v`` on ``|-i>``."""
    return gate_set(cfg).rabi_v(v)
