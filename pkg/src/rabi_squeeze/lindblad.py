"""Noisy protocol: piecewise-constant Hamiltonians integrated with the Lindblad master equation.

Time is measured in units of T, the time needed for ``exp(i P sigma_x)``, so
a gate with parameter ``u`` lasts ``|u|`` and rates enter as ``gamma * T``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._rk4 import rk4_steps
from .errors import IntegratorDiverged
from .gates import gate_set
from .hilbert import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    FockConfig,
    check_leak,
    density,
    sparse_annihilation,
    sparse_quadratures,
)
from .protocol import InteractionSchedule, ProtocolResult, initial_joint, result_from_joint

DEFAULT_DT = 1e-2
MIN_STEPS_PER_SEGMENT = 50
MAX_HALVINGS = 6
TRACE_TOL = 1e-6
# classical RK4 is stable for |h * lambda| below ~2.78 on both real and imaginary axes
RK4_STABILITY = 2.5
# default steps keep h * ||G|| below this, bounding RK4 phase error on long gates
PHASE_STEP = 0.075


class NoiseKind(str, enum.Enum):
    NONE = "none"
    BOSON_LOSS = "boson_loss"
    BOSON_DEPHASING = "boson_dephasing"
    BOSON_HEATING = "boson_heating"
    QUBIT_DECAY = "qubit_decay"
    QUBIT_DEPHASING = "qubit_dephasing"

    @classmethod
    def parse(cls, name) -> "NoiseKind":
        if isinstance(name, cls):
            return name
        key = "".join(ch for ch in str(name).lower() if ch.isalnum())
        for kind in cls:
            if kind.value.replace("_", "") == key:
                return kind
        raise ValueError(f"unknown noise kind {name!r}; expected one of {[k.value for k in cls]}")


NOISE_KINDS = tuple(k for k in NoiseKind if k is not NoiseKind.NONE)


@dataclass(frozen=True)
class NoiseModel:
    """One Lindblad channel with dimensionless rate ``gamma_T``.

    ``decay_to`` picks the qubit level qubit decay feeds. The default 0 is the
    literal ``(sigma_x + i sigma_y) / 2 = |0><1|`` with ``sigma_z|0> = |0>``.
    """

    kind: NoiseKind = NoiseKind.NONE
    gamma_T: float = 0.0
    decay_to: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind.parse(self.kind))
        if not (self.gamma_T >= 0 and math.isfinite(self.gamma_T)):
            raise ValueError(f"gamma_T must be finite and >= 0, got {self.gamma_T!r}")
        if self.decay_to not in (0, 1):
            raise ValueError("decay_to must be 0 or 1")

    @property
    def is_noiseless(self) -> bool:
        return self.kind is NoiseKind.NONE or self.gamma_T == 0.0


def _sparse_ops(m: NoiseModel, cfg: FockConfig) -> list[sp.csr_matrix]:
    if m.kind is NoiseKind.NONE:
        return []
    s = math.sqrt(m.gamma_T)
    a = sparse_annihilation(cfg.dim)
    ad = a.conj().T.tocsr()
    eye_b = sp.identity(cfg.dim, dtype=complex, format="csr")
    eye_q = sp.identity(2, dtype=complex, format="csr")

    def osc(b):
        return (s * sp.kron(eye_q, b, format="csr")).tocsr()

    def qubit(q):
        return (s * sp.kron(sp.csr_matrix(q), eye_b, format="csr")).tocsr()

    if m.kind is NoiseKind.BOSON_LOSS:
        return [osc(a)]
    if m.kind is NoiseKind.BOSON_DEPHASING:
        return [osc((a @ ad + ad @ a).tocsr())]
    if m.kind is NoiseKind.BOSON_HEATING:
        return [osc(a), osc(ad)]
    if m.kind is NoiseKind.QUBIT_DECAY:
        lower = (SIGMA_X + 1j * SIGMA_Y) / 2
        return [qubit(lower if m.decay_to == 0 else lower.conj().T)]
    if m.kind is NoiseKind.QUBIT_DEPHASING:
        return [qubit(SIGMA_Z)]
    raise AssertionError(m.kind)


def lindblad_ops(m: NoiseModel, cfg: FockConfig | None = None) -> list[np.ndarray]:
    """Jump operators on the joint space as dense matrices."""
    return [op.toarray() for op in _sparse_ops(m, cfg or FockConfig())]


# ---------------------------------------------------------------------------
# segments


class Generator(str, enum.Enum):
    P_SIGMA_X = "PSigmaX"
    X_SIGMA_Y = "XSigmaY"
    FREE = "Free"


@dataclass(frozen=True)
class Segment:
    generator: Generator
    sign: int
    duration: float


def schedule_to_segments(s: InteractionSchedule) -> tuple[Segment, ...]:
    """One segment per nonzero gate, lasting ``|u_k|`` or ``|v_k|``."""
    plan = []
    for u, v in zip(s.u, s.v):
        for gen, x in ((Generator.P_SIGMA_X, u), (Generator.X_SIGMA_Y, v)):
            if x != 0.0:
                plan.append(Segment(gen, 1 if x > 0 else -1, abs(x)))
    return tuple(plan)


def plan_duration(plan) -> float:
    return float(sum(seg.duration for seg in plan))


def _generator(gen: Generator, cfg: FockConfig) -> sp.csr_matrix | None:
    if gen is Generator.FREE:
        return None
    x, p = sparse_quadratures(cfg.dim)
    if gen is Generator.P_SIGMA_X:
        return sp.kron(sp.csr_matrix(SIGMA_X), p, format="csr")
    return sp.kron(sp.csr_matrix(SIGMA_Y), x, format="csr")


def _generator_norm(gen: Generator, cfg: FockConfig) -> float:
    if gen is Generator.FREE:
        return 0.0
    gs = gate_set(cfg)
    cache = gs.u_cache if gen is Generator.P_SIGMA_X else gs.v_cache
    return float(np.max(np.abs(cache.eigvals)))


def _csr_arrays(m: sp.csr_matrix):
    m = m.tocsr()
    m.sort_indices()
    return (
        np.ascontiguousarray(m.data, dtype=np.complex128),
        np.ascontiguousarray(m.indices, dtype=np.int64),
        np.ascontiguousarray(m.indptr, dtype=np.int64),
    )


def _step_size(seg: Segment, dt: float | None, stiffness: float, gen_norm: float = 0.0) -> float:
    if dt is not None:
        h = dt
    else:
        h = min(DEFAULT_DT, seg.duration / MIN_STEPS_PER_SEGMENT)
        if gen_norm > 0:
            h = min(h, PHASE_STEP / gen_norm)
    if stiffness > 0:
        h = min(h, RK4_STABILITY / stiffness)
    return h


def _is_diagonal(op: sp.csr_matrix) -> bool:
    return sp.triu(op, 1).nnz == 0 and sp.tril(op, -1).nnz == 0


def _diagonal_dissipator(ops, n: int) -> np.ndarray:
    """Elementwise factor ``C`` with ``D[L](rho) = C * rho`` summed over diagonal ``L``."""
    c = np.zeros((n, n), dtype=np.complex128)
    for op in ops:
        d = op.diagonal()
        sq = np.abs(d) ** 2
        c += np.outer(d, d.conj()) - 0.5 * (sq[:, None] + sq[None, :])
    return c


def _integrate(rho, heff, lstack, nops, c, duration, h):
    hd, hi, hp = _csr_arrays(heff)
    ld, li, lp = lstack
    n_full = int(math.floor(duration / h * (1 + 1e-12)))
    rest = duration - n_full * h
    rho = np.array(rho, dtype=np.complex128, order="C", copy=True)
    if n_full:
        rk4_steps(hd, hi, hp, ld, li, lp, nops, c, rho, h, n_full)
    # last step shortened to land exactly on the segment boundary
    if rest > 1e-12 * max(duration, 1.0):
        rk4_steps(hd, hi, hp, ld, li, lp, nops, c, rho, rest, 1)
    return rho


def _healthy(rho) -> bool:
    if not np.all(np.isfinite(rho)):
        return False
    if abs(np.trace(rho).real - 1.0) >= TRACE_TOL:
        return False
    return float(np.max(np.abs(rho))) <= 1.0 + TRACE_TOL


def evolve_master(rho0, plan, m: NoiseModel, cfg: FockConfig | None = None, dt: float | None = None):
    """Integrate the master equation over a segment plan with classical fixed-step RK4.

    During a segment with sign ``s`` the Hamiltonian is ``-s * G`` (``G`` the
    segment's generator), so a noiseless segment of duration ``|u|`` applies
    exactly ``exp(i u G)``. The default step is ``min(1e-2, duration / 50)`` per
    segment, capped so that ``h * ||G||`` stays below ``PHASE_STEP`` and further
    capped for RK4 stability. Jump operators diagonal in the
    joint basis (both dephasing channels) are integrated exactly through an
    integrating factor and do not enter the stability cap. A segment whose
    trace drifts by more than 1e-6 is retried with half the step, at most six
    times.
    """
    rho = np.asarray(rho0, dtype=complex)
    if cfg is None:
        cfg = FockConfig(cutoff=rho.shape[0] // 2 - 1)
    if rho.shape != (cfg.joint_dim, cfg.joint_dim):
        raise ValueError(f"density shape {rho.shape} does not match cutoff {cfg.cutoff}")
    if dt is not None and not dt > 0:
        raise ValueError("dt must be positive")

    ops = [] if m.gamma_T == 0.0 else _sparse_ops(m, cfg)
    n = cfg.joint_dim
    diag_ops = [op for op in ops if _is_diagonal(op)]
    ops = [op for op in ops if not _is_diagonal(op)]
    c = _diagonal_dissipator(diag_ops, n)
    if ops:
        lstack = _csr_arrays(sp.vstack(ops, format="csr"))
        decay = sum((op.conj().T @ op for op in ops[1:]), ops[0].conj().T @ ops[0]).tocsr()
        decay_norm = float(spla.norm(decay, 1))
    else:
        lstack = (np.zeros(0, np.complex128), np.zeros(0, np.int64), np.zeros(1, np.int64))
        decay = sp.csr_matrix((n, n), dtype=complex)
        decay_norm = 0.0

    for idx, seg in enumerate(plan):
        gen = _generator(seg.generator, cfg)
        ham = sp.csr_matrix((n, n), dtype=complex) if gen is None else -seg.sign * gen
        heff = (ham - 0.5j * decay).tocsr()
        g_norm = _generator_norm(seg.generator, cfg)
        h = _step_size(seg, dt, g_norm + decay_norm, g_norm)
        for _ in range(MAX_HALVINGS + 1):
            out = _integrate(rho, heff, lstack, len(ops), c, seg.duration, h)
            if _healthy(out):
                break
            h /= 2
        else:
            raise IntegratorDiverged(
                f"segment {idx} ({seg.generator.value}, duration {seg.duration:g}) failed "
                f"after {MAX_HALVINGS} step halvings"
            )
        rho = out
        check_leak(rho, cfg, joint=True, what=f"segment {idx}")
    return rho


def default_dt_report(plan, m: NoiseModel, cfg: FockConfig | None = None) -> list[float]:
    """Step size each segment would use by default (before any halving)."""
    cfg = cfg or FockConfig()
    ops = [op for op in _sparse_ops(m, cfg) if not _is_diagonal(op)] if m.gamma_T else []
    decay_norm = float(spla.norm(sum(op.conj().T @ op for op in ops), 1)) if ops else 0.0
    norms = [_generator_norm(seg.generator, cfg) for seg in plan]
    return [_step_size(seg, None, g + decay_norm, g) for seg, g in zip(plan, norms)]


def run_noisy_protocol(
    s: InteractionSchedule,
    m: NoiseModel,
    cfg: FockConfig | None = None,
    dt: float | None = None,
) -> ProtocolResult:
    """Protocol from ``|0><0| (x) |vac><vac|`` under one noise channel.

    The optional final qubit measurement is taken to be instantaneous and noiseless.
    """
    cfg = cfg or FockConfig()
    rho = evolve_master(density(initial_joint(cfg)), schedule_to_segments(s), m, cfg, dt)
    min_eig = float(np.linalg.eigvalsh(rho).min())
    if min_eig < -1e-6:
        raise IntegratorDiverged(f"final density has eigenvalue {min_eig:.3g}")
    return result_from_joint(
        rho, N=s.N, noise_type=m.kind.value, gamma_T=m.gamma_T, min_eigenvalue=min_eig
    )
