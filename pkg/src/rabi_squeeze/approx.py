"""Squeezed vacuum approximated by a discrete line of coherent states.

The state is ``sum_s exp(-a_s^2 / (Delta^-2 - 1)) |a_s>`` with half-integer
lattice points ``a_s = d_alpha * (s + 1/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LeakError
from .hilbert import (
    FockConfig,
    check_leak,
    coherent_amplitudes,
    cutoff_for_coherent,
    cutoff_for_squeezing,
    squeezed_vacuum,
)
from .metrics import fidelity, squeezing_db


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice spacing, target squeezing and the relative envelope cut."""

    d_alpha: float
    delta_db: float
    trunc_tol: float = 1e-10

    def __post_init__(self):
        if not self.d_alpha > 0:
            raise ValueError("d_alpha must be positive")
        if not self.delta_db > 0:
            raise ValueError("delta_db must be positive (the envelope needs Delta < 1)")
        if not 0 < self.trunc_tol < 1:
            raise ValueError("trunc_tol must lie in (0, 1)")

    @property
    def envelope_width(self) -> float:
        """``Delta^-2 - 1``."""
        return 10.0 ** (self.delta_db / 10.0) - 1.0

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Lattice amplitudes and envelope weights, keeping weights >= ``trunc_tol`` times the largest."""
        width = self.envelope_width
        a0 = 0.5 * self.d_alpha
        a_max = math.sqrt(width * -math.log(self.trunc_tol) + a0 * a0)
        s_max = int(math.floor(a_max / self.d_alpha - 0.5))
        s = np.arange(-s_max - 1, s_max + 1)
        alphas = self.d_alpha * (s + 0.5)
        # relative to the innermost pair at +-d_alpha/2
        weights = np.exp(-(alphas**2 - a0 * a0) / width)
        keep = weights >= self.trunc_tol
        return alphas[keep], weights[keep]


def lattice_superposition(spec: LatticeSpec, cfg: FockConfig | None = None) -> np.ndarray:
    cfg = cfg or FockConfig()
    alphas, weights = spec.points()
    psi = np.zeros(cfg.dim, dtype=complex)
    for a, w in zip(alphas, weights):
        psi += w * coherent_amplitudes(a, cfg.dim)
    psi /= np.linalg.norm(psi)
    check_leak(psi, cfg, what=f"lattice d_alpha={spec.d_alpha}, {spec.delta_db} dB")
    return psi


def auto_config(spec: LatticeSpec, leak_tol: float = 1e-7) -> FockConfig:
    """Cutoff large enough for both the lattice state and its target.

    Each component only needs its tail bounded in proportion to its share of
    the total weight, so faint outer components do not inflate the cutoff.
    """
    alphas, weights = spec.points()
    share = weights**2 / np.sum(weights**2)
    c = cutoff_for_squeezing(spec.delta_db, leak_tol)
    for a, s in zip(np.abs(alphas), share):
        tol = leak_tol / s
        if tol < 1.0:
            c = max(c, cutoff_for_coherent(float(a), tol))
    return FockConfig(cutoff=c, leak_tol=leak_tol)


@dataclass(frozen=True)
class ApproxRow:
    d_alpha: float
    delta_db_target: float
    squeeze_db: float
    antisqueeze_db: float
    fidelity: float
    cutoff: int


def approx_point(d_alpha: float, delta_db: float, cfg: FockConfig | None = None, trunc_tol: float = 1e-10) -> ApproxRow:
    spec = LatticeSpec(d_alpha, delta_db, trunc_tol)
    if cfg is None:
        cfg = auto_config(spec)
        for _ in range(4):
            try:
                psi = lattice_superposition(spec, cfg)
                target = squeezed_vacuum(delta_db, cfg)
                break
            except LeakError:
                cfg = FockConfig(cutoff=int(cfg.cutoff * 1.5), leak_tol=cfg.leak_tol)
        else:
            raise LeakError(f"no adequate cutoff found for d_alpha={d_alpha}, {delta_db} dB")
    else:
        psi = lattice_superposition(spec, cfg)
        target = squeezed_vacuum(delta_db, cfg)
    sq, asq = squeezing_db(psi)
    return ApproxRow(float(d_alpha), float(delta_db), sq, asq, fidelity(psi, target), cfg.cutoff)


def approx_scan(d_alpha_grid, delta_db_grid, cfg: FockConfig | None = None, trunc_tol: float = 1e-10) -> list[ApproxRow]:
    """One row per (d_alpha, delta_db) in grid order (target varies fastest).

    Without ``cfg`` each point picks its own cutoff.
    """
    d_alpha_grid = list(d_alpha_grid)
    delta_db_grid = list(delta_db_grid)
    if not d_alpha_grid or not delta_db_grid:
        raise ValueError("empty grid")
    return [approx_point(da, db, cfg, trunc_tol) for da in d_alpha_grid for db in delta_db_grid]
