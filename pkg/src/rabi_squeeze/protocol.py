"""Interaction schedules and the N-step Rabi-gate protocol."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RegimeError, ZeroProbability
from .gates import gate_set
from .hilbert import (
    FockConfig,
    check_leak,
    partial_trace_qubit,
    project_qubit,
)


@dataclass(frozen=True)
class InteractionSchedule:
    """Gate strengths ``u_k`` (P sigma_x) and ``v_k`` (X sigma_y) for ``k = 1..N``.

    ``L`` is the lattice scale for analytic schedules and optional metadata otherwise.
    """

    u: tuple[float, ...]
    v: tuple[float, ...]
    L: float | None = None

    def __post_init__(self):
        u = tuple(float(x) for x in self.u)
        v = tuple(float(x) for x in self.v)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if len(u) < 1 or len(u) != len(v):
            raise ValueError(f"need N >= 1 with len(u) == len(v), got {len(u)} and {len(v)}")
        if not all(math.isfinite(x) for x in u + v):
            raise ValueError("schedule entries must be finite")
        if self.L is not None:
            object.__setattr__(self, "L", float(self.L))

    @property
    def N(self) -> int:
        return len(self.u)

    @property
    def total_duration(self) -> float:
        """Protocol time in units of T, sum of ``|u_k| + |v_k|``."""
        return float(sum(abs(x) for x in self.u) + sum(abs(x) for x in self.v))

    def as_vector(self) -> np.ndarray:
        return np.array(self.u + self.v)

    @classmethod
    def from_vector(cls, x, L: float | None = None) -> "InteractionSchedule":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(tuple(x[:n]), tuple(x[n:]), L)

    @classmethod
    def zeros(cls, N: int) -> "InteractionSchedule":
        return cls((0.0,) * N, (0.0,) * N)

    def to_dict(self) -> dict:
        return {"N": self.N, "L": self.L, "u": list(self.u), "v": list(self.v)}

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionSchedule":
        unknown = set(d) - {"N", "L", "u", "v"}
        if unknown:
            raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
        s = cls(tuple(d["u"]), tuple(d["v"]), d.get("L"))
        if "N" in d and int(d["N"]) != s.N:
            raise ValueError(f"schedule N={d['N']} does not match {s.N} parameter pairs")
        return s

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "InteractionSchedule":
        return cls.from_dict(json.loads(text))


def analytic_schedule(N: int, L: float) -> InteractionSchedule:
    """Closed-form seed schedule producing ``2**N`` coherent peaks spaced by ``2L``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not L > 0:
        raise ValueError("L must be positive")
    r2 = math.sqrt(2.0)
    u = [2 ** (N - 1) * r2 * L] + [-(2 ** (N - k)) * r2 * L for k in range(2, N + 1)]
    v = [2.0 ** (-(N - k)) * math.pi / (4 * r2 * L) for k in range(1, N)]
    v.append(-math.pi / (4 * r2 * L))
    return InteractionSchedule(tuple(u), tuple(v), L)


@dataclass(frozen=True)
class ProtocolResult:
    """Joint output plus both oscillator branches.

    ``deterministic`` is the qubit-traced density matrix. ``postselected`` is the
    oscillator state conditioned on qubit outcome 0 (a vector when the joint state
    is pure); it is ``None`` when that outcome has vanishing probability.
    """

    joint: np.ndarray
    deterministic: np.ndarray
    postselected: np.ndarray | None
    postselect_prob: float
    meta: dict = field(default_factory=dict)

    def branch(self, postselected: bool):
        if not postselected:
            return self.deterministic
        if self.postselected is None:
            raise ZeroProbability("postselected branch has zero probability")
        return self.postselected


def initial_joint(cfg: FockConfig) -> np.ndarray:
    """``|0>|vac>``."""
    psi = np.zeros(cfg.joint_dim, dtype=complex)
    psi[0] = 1.0
    return psi


def evolve_pure(s: InteractionSchedule, cfg: FockConfig, check: bool = True) -> np.ndarray:
    """Apply ``V_N U_N ... V_1 U_1`` to ``|0>|vac>`` and return the joint vector."""
    gs = gate_set(cfg)
    psi = initial_joint(cfg)
    for k, (u, v) in enumerate(zip(s.u, s.v), start=1):
        psi = gs.apply_u(u, psi)
        if check:
            check_leak(psi, cfg, joint=True, what=f"after U_{k}")
        psi = gs.apply_v(v, psi)
        if check:
            check_leak(psi, cfg, joint=True, what=f"after V_{k}")
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > 1e-10:
        raise AssertionError(f"unitary protocol changed the norm to {norm!r}")
    return psi


def result_from_joint(joint: np.ndarray, **meta) -> ProtocolResult:
    det = partial_trace_qubit(joint)
    try:
        post, prob = project_qubit(joint, 0)
    except ZeroProbability:
        post, prob = None, 0.0
    return ProtocolResult(joint, det, post, prob, dict(meta))


def run_unitary(s: InteractionSchedule, cfg: FockConfig | None = None) -> ProtocolResult:
    """Noiseless protocol with exact gates."""
    cfg = cfg or FockConfig()
    return result_from_joint(evolve_pure(s, cfg), N=s.N, noise_type="none", gamma_T=0.0)


def count_peaks(values: np.ndarray, rel_floor: float = 1e-6) -> int:
    """Strict local maxima of a sampled density; plateaus count once.

    Maxima lower than ``rel_floor`` times the global maximum are ignored.
    """
    values = np.asarray(values, dtype=float)
    floor = rel_floor * values.max()
    # collapse runs of equal values so plateaus are a single sample
    keep = np.r_[True, values[1:] != values[:-1]]
    y = values[keep]
    if y.size < 3:
        return 0
    interior = (y[1:-1] > y[:-2]) & (y[1:-1] > y[2:]) & (y[1:-1] > floor)
    return int(interior.sum())


def peak_count_check(s: InteractionSchedule, cfg: FockConfig | None = None, spacing: float = 0.01) -> int:
    """Number of peaks in the X-quadrature density of the deterministic output.

    Only meaningful when the coherent components are well separated, which is
    enforced as ``2**N * L >= 6``.
    """
    from .metrics import x_density

    cfg = cfg or FockConfig()
    if s.L is None:
        raise RegimeError("peak counting needs the schedule's lattice scale L")
    if 2**s.N * s.L < 6:
        raise RegimeError(f"2^N L = {2**s.N * s.L:g} < 6: coherent components overlap")
    rho = run_unitary(s, cfg).deterministic
    half = math.sqrt(2 * cfg.cutoff + 1) + 4.0
    n_points = 2 * int(math.ceil(half / spacing)) + 1
    grid = x_density(rho, -half, half, n_points)
    return count_peaks(grid.values)
