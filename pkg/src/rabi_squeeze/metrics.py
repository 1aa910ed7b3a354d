"""Figures of merit for oscillator states.

Every function accepts either a pure state (1-D Fock amplitudes) or a density
matrix. Variances are central: ``Var(P) = <P^2> - <P>^2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid

from .errors import GridTooSmall, NonPositive, UnstableEstimate
from .hilbert import FockConfig, sparse_quadratures, squeezed_vacuum

DEFAULT_P_RANGE = (-8.0, 8.0)
DEFAULT_N_POINTS = 4001
MAX_REFINEMENTS = 3
FISHER_FLOOR = 1e-12
FISHER_REL_TOL = 5e-3


def _is_pure(state) -> bool:
    return np.ndim(state) == 1


def _expect_pair(op, state):
    """(<A>, <A^2>) for a Hermitian sparse operator."""
    if _is_pure(state):
        a_psi = op @ state
        return np.vdot(state, a_psi).real, np.vdot(a_psi, a_psi).real
    a_rho = op @ state
    return np.trace(a_rho).real, np.trace(op @ a_rho).real


def moments(state) -> tuple[float, float, float, float]:
    """``(mean_x, mean_p, var_x, var_p)``."""
    state = np.asarray(state)
    x, p = sparse_quadratures(state.shape[0])
    mx, x2 = _expect_pair(x, state)
    mp, p2 = _expect_pair(p, state)
    return mx, mp, x2 - mx * mx, p2 - mp * mp


def variance_to_db(var: float) -> float:
    return -10.0 * math.log10(2.0 * var)


def squeezing_db(state) -> tuple[float, float]:
    """``(squeeze_db, antisqueeze_db)`` from Var(P) and Var(X); anti-squeezing comes out negative."""
    _, _, var_x, var_p = moments(state)
    return variance_to_db(var_p), variance_to_db(var_x)


def fidelity(state, target) -> float:
    """``<t|rho|t>`` for a pure target ``t``."""
    target = np.asarray(target)
    if _is_pure(state):
        return float(abs(np.vdot(target, state)) ** 2)
    return float(np.vdot(target, np.asarray(state) @ target).real)


def best_fit_squeezed_fidelity(state, lo: float = 0.0, hi: float = 20.0, tol: float = 1e-4):
    """Maximize fidelity to a P-squeezed vacuum over its dB level by golden-section search.

    Returns ``(fidelity, delta_db)``.
    """
    cfg = FockConfig(cutoff=np.shape(state)[0] - 1)

    def f(d):
        return fidelity(state, squeezed_vacuum(d, cfg, check=False))

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    candidates = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    best_f, best_d = max(candidates)
    return best_f, best_d


# ---------------------------------------------------------------------------
# quadrature densities


@dataclass(frozen=True)
class QuadratureGrid:
    """Probability density of one quadrature on a uniform grid."""

    lo: float
    hi: float
    n_points: int
    values: np.ndarray
    quadrature: str = "p"

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    def integral(self) -> float:
        return float(trapezoid(self.values, dx=self.spacing))

    def second_moment(self) -> float:
        pts = self.points
        mean = trapezoid(pts * self.values, dx=self.spacing)
        return float(trapezoid((pts - mean) ** 2 * self.values, dx=self.spacing))


@lru_cache(maxsize=6)
def hermite_functions(lo: float, hi: float, n_points: int, dim: int) -> np.ndarray:
    """Normalized Hermite functions ``psi_n(t)`` for ``n < dim`` on a grid, shape (dim, n_points)."""
    t = np.linspace(lo, hi, n_points)
    out = np.empty((dim, n_points))
    out[0] = np.pi**-0.25 * np.exp(-0.5 * t * t)
    if dim > 1:
        out[1] = math.sqrt(2.0) * t * out[0]
    for n in range(1, dim - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * t * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    out.setflags(write=False)
    return out


def _density(state, lo, hi, n_points, quadrature) -> np.ndarray:
    state = np.asarray(state)
    dim = state.shape[0]
    h = hermite_functions(float(lo), float(hi), int(n_points), dim)
    # <p|n> = (-i)^n psi_n(p); <x|n> = psi_n(x)
    phase = (-1j) ** np.arange(dim) if quadrature == "p" else np.ones(dim)
    if _is_pure(state):
        amp = (phase * state) @ h
        return np.abs(amp) ** 2
    rho = phase[:, None] * state * phase.conj()[None, :]
    return np.real(np.sum(h * (rho @ h), axis=0))


def quadrature_density(state, lo, hi, n_points, quadrature="p") -> QuadratureGrid:
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError(f"n_points must be odd and >= 3, got {n_points}")
    q = _density(state, lo, hi, n_points, quadrature)
    if q.min() < -1e-12:
        raise ArithmeticError(f"negative density {q.min():.3g}")
    q = np.clip(q, 0.0, None)
    if max(q[0], q[-1]) >= 1e-10:
        raise GridTooSmall(
            f"{quadrature}-density at grid edge is {max(q[0], q[-1]):.3g}; widen [{lo}, {hi}]"
        )
    grid = QuadratureGrid(float(lo), float(hi), int(n_points), q, quadrature)
    total = grid.integral()
    if abs(total - 1.0) > 1e-4:
        raise GridTooSmall(f"{quadrature}-density integrates to {total:.6f}")
    return grid


def p_density(state, p_min=DEFAULT_P_RANGE[0], p_max=DEFAULT_P_RANGE[1], n_points=DEFAULT_N_POINTS):
    """Momentum-quadrature probability density ``<p|rho|p>``."""
    return quadrature_density(state, p_min, p_max, n_points, "p")


def x_density(state, x_min, x_max, n_points):
    return quadrature_density(state, x_min, x_max, n_points, "x")


def _fisher_on(points, q, spacing):
    dq = np.gradient(q, spacing)
    keep = q > FISHER_FLOOR * q.max()
    integrand = np.zeros_like(q)
    integrand[keep] = dq[keep] ** 2 / q[keep]
    return 2.0 * float(trapezoid(integrand, dx=spacing))


def fisher_information(grid: QuadratureGrid, check: bool = True) -> float:
    """Classical Fisher information for displacement sensing with homodyne detection.

    ``I_C = 2 * integral (dq/dp)^2 / q dp`` with central differences. With ``check``
    the estimate is repeated on every other grid point and must agree to 0.5%.
    """
    full = _fisher_on(grid.points, grid.values, grid.spacing)
    if check:
        coarse = _fisher_on(grid.points[::2], grid.values[::2], 2 * grid.spacing)
        if abs(coarse - full) > FISHER_REL_TOL * abs(full):
            raise UnstableEstimate(
                f"Fisher information {full:.6g} vs {coarse:.6g} on the half-resolution grid"
            )
    return full


def fisher_resolved(state, p_min=None, p_max=None, n_points=DEFAULT_N_POINTS) -> float:
    """Fisher information of the p-density, doubling the grid resolution until the estimate is stable.

    Without explicit bounds the grid covers the default range widened to 12
    standard deviations around the mean.
    """
    if p_min is None or p_max is None:
        _, mp, _, vp = moments(state)
        half = 12.0 * math.sqrt(vp)
        p_min = min(DEFAULT_P_RANGE[0], mp - half) if p_min is None else p_min
        p_max = max(DEFAULT_P_RANGE[1], mp + half) if p_max is None else p_max
    for _ in range(MAX_REFINEMENTS):
        try:
            return fisher_information(p_density(state, p_min, p_max, n_points))
        except UnstableEstimate:
            n_points = 2 * n_points - 1
    return fisher_information(p_density(state, p_min, p_max, n_points))


def gaussian_equiv_db(fisher: float) -> float:
    """Squeezing of the Gaussian state with the same Fisher information (``I_C = 2 / Var(P)``)."""
    if not fisher > 0:
        raise NonPositive(f"Fisher information must be positive, got {fisher!r}")
    return 10.0 * math.log10(fisher / 4.0)


# ---------------------------------------------------------------------------
# records

CSV_COLUMNS = (
    "N",
    "squeeze_db",
    "antisqueeze_db",
    "fidelity",
    "fisher",
    "fisher_equiv_db",
    "postselect_prob",
    "noise_type",
    "gamma_T",
    "postselected",
)


def fmt(value) -> str:
    """CSV cell: floats with 9 significant digits."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    if value is None:
        return ""
    return str(value)


@dataclass(frozen=True)
class MetricsRecord:
    squeeze_db: float
    antisqueeze_db: float
    mean_x: float
    mean_p: float
    fidelity: float
    fisher: float
    fisher_equiv_db: float
    postselect_prob: float
    best_fit_db: float = float("nan")
    N: int | None = None
    noise_type: str = "none"
    gamma_T: float = 0.0
    postselected: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsRecord":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def csv_row(self) -> list[str]:
        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


def evaluate(
    state,
    *,
    N: int | None = None,
    noise_type: str = "none",
    gamma_T: float = 0.0,
    postselected: bool = False,
    postselect_prob: float = 1.0,
    with_fisher: bool = True,
) -> MetricsRecord:
    """Compute the full metrics record for one oscillator state."""
    mx, mp, vx, vp = moments(state)
    fid, best_db = best_fit_squeezed_fidelity(state)
    if with_fisher:
        fisher = fisher_resolved(state)
        equiv = gaussian_equiv_db(fisher)
    else:
        fisher = equiv = float("nan")
    return MetricsRecord(
        squeeze_db=variance_to_db(vp),
        antisqueeze_db=variance_to_db(vx),
        mean_x=float(mx),
        mean_p=float(mp),
        fidelity=float(fid),
        fisher=float(fisher),
        fisher_equiv_db=float(equiv),
        postselect_prob=float(postselect_prob),
        best_fit_db=float(best_db),
        N=N,
        noise_type=noise_type,
        gamma_T=float(gamma_T),
        postselected=bool(postselected),
    )
