"""Truncated Fock space for a qubit-coupled oscillator.

Oscillator states are numpy arrays: a 1-D array of Fock amplitudes for a pure
state, or a square density matrix. Joint states live on qubit (x) oscillator
with qubit-major ordering, i.e. entry ``q * (cutoff + 1) + n`` is qubit level
``q`` and Fock level ``n``.

Quadratures follow ``a = (X + iP) / sqrt(2)`` so the vacuum has
``<X^2> = <P^2> = 1/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammainc, gammaln

from .errors import LeakError, ZeroProbability

LEAK_LEVELS = 5

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
QUBIT_I = np.eye(2, dtype=complex)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
KET_PLUS_I = np.array([1, 1j], dtype=complex) / np.sqrt(2)
KET_MINUS_I = np.array([1, -1j], dtype=complex) / np.sqrt(2)

for _arr in (SIGMA_X, SIGMA_Y, SIGMA_Z, QUBIT_I, KET_0, KET_1, KET_PLUS, KET_MINUS, KET_PLUS_I, KET_MINUS_I):
    _arr.setflags(write=False)


@dataclass(frozen=True)
class FockConfig:
    """Oscillator truncation.

    ``cutoff`` is the highest retained Fock index; ``leak_tol`` bounds the
    population allowed in the top ``LEAK_LEVELS`` levels of any produced state.
    """

    cutoff: int = 120
    leak_tol: float = 1e-7

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 8:
            raise ValueError(f"cutoff must be an integer >= 8, got {self.cutoff!r}")
        if not 0.0 < self.leak_tol < 1.0:
            raise ValueError(f"leak_tol must lie in (0, 1), got {self.leak_tol!r}")

    @property
    def dim(self) -> int:
        return self.cutoff + 1

    @property
    def joint_dim(self) -> int:
        return 2 * (self.cutoff + 1)


def _frozen(a):
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# operators


@lru_cache(maxsize=None)
def _sparse_ladder(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, format="csr").astype(complex)


@lru_cache(maxsize=None)
def sparse_quadratures(dim: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse (X, P) on a ``dim``-level oscillator."""
    a = _sparse_ladder(dim)
    ad = a.conj().T.tocsr()
    x = ((a + ad) / np.sqrt(2)).tocsr()
    p = ((a - ad) / (1j * np.sqrt(2))).tocsr()
    return x, p


def sparse_annihilation(dim: int) -> sp.csr_matrix:
    return _sparse_ladder(dim)


@lru_cache(maxsize=None)
def annihilation(cfg: FockConfig) -> np.ndarray:
    return _frozen(_sparse_ladder(cfg.dim).toarray())


def creation(cfg: FockConfig) -> np.ndarray:
    return _frozen(annihilation(cfg).conj().T.copy())


@lru_cache(maxsize=None)
def quadratures(cfg: FockConfig) -> tuple[np.ndarray, np.ndarray]:
    """Dense Hermitian (X, P). ``[X, P] = i`` holds except in the top Fock row/column."""
    x, p = sparse_quadratures(cfg.dim)
    return _frozen(x.toarray()), _frozen(p.toarray())


def number(cfg: FockConfig) -> np.ndarray:
    return _frozen(np.diag(np.arange(cfg.dim, dtype=complex)))


def tensor_qubit_osc(q, b):
    """Embed a qubit operator ``q`` and oscillator operator ``b`` as ``q (x) b``."""
    q = np.asarray(q) if not sp.issparse(q) else q
    if q.shape != (2, 2):
        raise ValueError(f"qubit operator must be 2x2, got {q.shape}")
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"oscillator operator must be square, got {b.shape}")
    if sp.issparse(b):
        return sp.kron(sp.csr_matrix(q), b, format="csr")
    return np.kron(q, b)


def is_hermitian(a, tol: float = 1e-12) -> bool:
    a = a.toarray() if sp.issparse(a) else np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) < tol)


def is_unitary(u, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < tol)


# ---------------------------------------------------------------------------
# leak checks


def top_population(state, dim: int | None = None) -> float:
    """Population in the top ``LEAK_LEVELS`` Fock levels.

    ``dim`` is the oscillator dimension; pass it for joint states (whose length
    is ``2 * dim``). Without it the state is taken to be an oscillator state.
    """
    state = np.asarray(state)
    n = state.shape[0]
    dim = n if dim is None else dim
    if state.ndim == 1:
        pops = np.abs(state) ** 2
    else:
        pops = np.real(np.diagonal(state))
    pops = pops.reshape(n // dim, dim).sum(axis=0)
    return float(pops[-LEAK_LEVELS:].sum())


def check_leak(state, cfg: FockConfig, joint: bool = False, what: str = "state"):
    leak = top_population(state, cfg.dim if joint else None)
    if leak > cfg.leak_tol:
        raise LeakError(
            f"{what}: population {leak:.3g} in top {LEAK_LEVELS} Fock levels exceeds "
            f"leak_tol={cfg.leak_tol:g} at cutoff {cfg.cutoff}"
        )
    return leak


def _check_norm(psi, tol=1e-10):
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > tol:
        raise AssertionError(f"state norm drifted to {norm!r}")


# ---------------------------------------------------------------------------
# states


def vacuum(cfg: FockConfig) -> np.ndarray:
    psi = np.zeros(cfg.dim, dtype=complex)
    psi[0] = 1.0
    return psi


def fock(n: int, cfg: FockConfig) -> np.ndarray:
    if not 0 <= n <= cfg.cutoff:
        raise ValueError(f"Fock level {n} outside 0..{cfg.cutoff}")
    psi = np.zeros(cfg.dim, dtype=complex)
    psi[n] = 1.0
    return psi


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Untruncated-normalization coherent amplitudes on the first ``dim`` levels."""
    n = np.arange(dim)
    r = abs(alpha)
    if r == 0.0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -0.5 * r * r + n * np.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def coherent(alpha: complex, cfg: FockConfig) -> np.ndarray:
    """Coherent state ``|alpha>``; real ``alpha`` displaces along X by ``sqrt(2) alpha``."""
    deficit = float(gammainc(cfg.dim, abs(alpha) ** 2)) if alpha != 0 else 0.0
    if deficit > cfg.leak_tol:
        raise LeakError(
            f"coherent({alpha}): {deficit:.3g} of the norm lies above cutoff {cfg.cutoff}"
        )
    psi = coherent_amplitudes(alpha, cfg.dim)
    return psi / np.linalg.norm(psi)


def squeeze_parameter(delta_db: float) -> float:
    """Squeezing parameter r with ``Var(P) = exp(-2r) / 2`` for a ``delta_db`` squeezed vacuum."""
    return delta_db * np.log(10.0) / 20.0


@lru_cache(maxsize=None)
def _squeeze_generator(dim: int) -> sp.csr_matrix:
    a = _sparse_ladder(dim)
    a2 = (a @ a).tocsr()
    return (0.5 * (a2.conj().T - a2)).tocsr()


def squeezed_vacuum(delta_db: float, cfg: FockConfig, check: bool = True) -> np.ndarray:
    """P-squeezed vacuum with ``Var(P) = Delta^2 / 2`` and ``Delta^2 = 10**(-delta_db / 10)``.

    Built by acting with the exponential of the squeeze generator on vacuum.
    ``check=False`` skips the leak test (used when scanning trial targets).
    """
    r = squeeze_parameter(delta_db)
    psi = expm_multiply(r * _squeeze_generator(cfg.dim), vacuum(cfg))
    psi = psi / np.linalg.norm(psi)
    if check:
        check_leak(psi, cfg, what=f"squeezed_vacuum({delta_db} dB)")
    return psi


def squeezed_vacuum_closed_form(delta_db: float, dim: int) -> np.ndarray:
    """Textbook Fock amplitudes of the P-squeezed vacuum (reference values)."""
    r = squeeze_parameter(delta_db)
    out = np.zeros(dim, dtype=complex)
    m = np.arange((dim + 1) // 2)
    if r == 0.0:
        out[0] = 1.0
        return out
    logc = (
        -0.5 * np.log(np.cosh(r))
        + m * np.log(np.tanh(abs(r)))
        + 0.5 * gammaln(2 * m + 1)
        - m * np.log(2.0)
        - gammaln(m + 1)
    )
    out[0::2] = np.exp(logc) * np.sign(r) ** m
    return out


def cutoff_for_squeezing(delta_db: float, leak_tol: float = 1e-7, margin: int = 10) -> int:
    """Smallest cutoff (plus ``margin``) whose top levels hold less than ``leak_tol`` of an ideal squeezed vacuum."""
    dim = 256
    while True:
        pops = np.abs(squeezed_vacuum_closed_form(abs(delta_db), dim)) ** 2
        if pops[-2:].sum() < 1e-30 or dim >= 1 << 17:
            break
        dim *= 2
    # tail[k] = population in levels >= k
    tail = np.cumsum(pops[::-1])[::-1]
    first = int(np.argmax(tail < leak_tol / 10))
    return max(8, first + LEAK_LEVELS - 1 + margin)


def cutoff_for_coherent(alpha_max: float, leak_tol: float = 1e-7, margin: int = 10) -> int:
    """Smallest cutoff holding ``|alpha_max>`` with norm deficit below ``leak_tol``."""
    c = 8
    while gammainc(c + 1 - LEAK_LEVELS, alpha_max**2) > leak_tol / 10:
        c += 1
    return c + margin


def joint_state(qubit, osc) -> np.ndarray:
    return np.kron(np.asarray(qubit, dtype=complex), np.asarray(osc, dtype=complex))


def density(psi) -> np.ndarray:
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())


# ---------------------------------------------------------------------------
# reductions


def _as_blocks(state):
    state = np.asarray(state)
    dim = state.shape[0] // 2
    if 2 * dim != state.shape[0]:
        raise ValueError("joint state has odd length")
    if state.ndim == 1:
        return state.reshape(2, dim), dim
    return state.reshape(2, dim, 2, dim), dim


def partial_trace_qubit(state) -> np.ndarray:
    """Reduced oscillator density matrix of a joint state (vector or density)."""
    blocks, _ = _as_blocks(state)
    if blocks.ndim == 2:
        rho = blocks.T @ blocks.conj()
    else:
        rho = blocks[0, :, 0, :] + blocks[1, :, 1, :]
    tr = np.trace(rho).real
    full = np.vdot(state, state).real if np.ndim(state) == 1 else np.trace(state).real
    if abs(tr - full) > 1e-10:
        raise AssertionError(f"partial trace changed the trace: {full} -> {tr}")
    return rho


def qubit_reduced(state) -> np.ndarray:
    """Reduced 2x2 qubit density matrix of a joint state."""
    blocks, _ = _as_blocks(state)
    if blocks.ndim == 2:
        return blocks @ blocks.conj().T
    return np.einsum("anbn->ab", blocks)


def project_qubit(state, outcome: int = 0):
    """Project the qubit on ``|outcome>``; return (conditional oscillator state, probability).

    A pure joint vector gives a pure oscillator vector, a density gives a density.
    """
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    blocks, _ = _as_blocks(state)
    if blocks.ndim == 2:
        branch = blocks[outcome]
        prob = float(np.vdot(branch, branch).real)
        if prob < 1e-12:
            raise ZeroProbability(f"qubit outcome {outcome} has probability {prob:.3g}")
        out = branch / np.sqrt(prob)
        _check_norm(out)
        return out, min(prob, 1.0)
    branch = blocks[outcome, :, outcome, :]
    prob = float(np.trace(branch).real)
    if prob < 1e-12:
        raise ZeroProbability(f"qubit outcome {outcome} has probability {prob:.3g}")
    return branch / prob, min(prob, 1.0)


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho, rho)))
