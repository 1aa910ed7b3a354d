"""Multi-start Nelder-Mead search over the 2N gate strengths."""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import LeakError, ZeroProbability
from .gates import gate_set
from .hilbert import FockConfig, check_leak, sparse_quadratures
from .metrics import MetricsRecord, evaluate
from .protocol import InteractionSchedule, analytic_schedule, initial_joint, run_unitary

DEFAULT_L_GRID = tuple(round(0.30 + 0.05 * i, 2) for i in range(9))
DEFAULT_BUDGET = 20000
RESTARTS_PER_L = 3
JITTER = 0.05
PENALTY = 1e3
MIN_POSTSELECT_PROB = 0.5
FATOL = 1e-12
XATOL = 1e-10


class Target(str, enum.Enum):
    SQUEEZE_ONLY = "squeeze_only"
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class Objective:
    """What to minimize: ``Var(P)`` or ``Var(P)^(1-w) (Var(P) Var(X))^w``."""

    w: float = 0.0
    postselected: bool = False
    target: Target = Target.SQUEEZE_ONLY

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"w must lie in [0, 1], got {self.w!r}")

    @classmethod
    def weighted(cls, w: float, postselected: bool = False) -> "Objective":
        return cls(w=w, postselected=postselected, target=Target.WEIGHTED)

    def from_variances(self, var_x: float, var_p: float) -> float:
        if self.target is Target.SQUEEZE_ONLY:
            return var_p
        return var_p ** (1.0 - self.w) * (var_p * var_x) ** self.w

    def to_dict(self) -> dict:
        return {"w": self.w, "postselected": self.postselected, "target": self.target.value}


def branch_variances(psi: np.ndarray, dim: int, postselected: bool) -> tuple[float, float, float]:
    """``(var_x, var_p, prob)`` of the oscillator branch of a pure joint state."""
    x, p = sparse_quadratures(dim)
    blocks = psi.reshape(2, dim)
    if postselected:
        prob = float(np.vdot(blocks[0], blocks[0]).real)
        if prob < 1e-12:
            raise ZeroProbability("qubit outcome 0 has zero probability")
        cols = blocks[:1].T / math.sqrt(prob)
    else:
        prob = 1.0
        cols = blocks.T
    xc = x @ cols
    pc = p @ cols
    mx = np.vdot(cols, xc).real
    mp = np.vdot(cols, pc).real
    var_x = np.vdot(xc, xc).real - mx * mx
    var_p = np.vdot(pc, pc).real - mp * mp
    return float(var_x), float(var_p), prob


def _pure_output(x: np.ndarray, cfg: FockConfig) -> np.ndarray:
    gs = gate_set(cfg)
    n = x.size // 2
    psi = initial_joint(cfg)
    for k in range(n):
        psi = gs.apply_u(x[k], psi)
        check_leak(psi, cfg, joint=True)
        psi = gs.apply_v(x[n + k], psi)
        check_leak(psi, cfg, joint=True)
    return psi


def objective_value(s: InteractionSchedule, obj: Objective, cfg: FockConfig | None = None) -> float:
    """Objective of a schedule on the chosen branch; ``LeakError`` propagates."""
    cfg = cfg or FockConfig()
    psi = _pure_output(s.as_vector(), cfg)
    var_x, var_p, _ = branch_variances(psi, cfg.dim, obj.postselected)
    return obj.from_variances(var_x, var_p)


def _penalized(x: np.ndarray, obj: Objective, cfg: FockConfig) -> float:
    try:
        psi = _pure_output(np.asarray(x), cfg)
        var_x, var_p, prob = branch_variances(psi, cfg.dim, obj.postselected)
    except (LeakError, ZeroProbability):
        return PENALTY
    if obj.postselected and prob < MIN_POSTSELECT_PROB:
        return PENALTY
    return obj.from_variances(var_x, var_p)


@dataclass(frozen=True)
class StartResult:
    L: float
    restart: int
    objective: float
    x: tuple[float, ...]
    evaluations: int
    converged: bool


def _run_start(task) -> StartResult:
    N, L, li, restart, obj, seed, cfg, budget = task
    base = analytic_schedule(N, L).as_vector()
    rng = np.random.default_rng([seed, li, restart])
    x0 = base * (1.0 + rng.uniform(-JITTER, JITTER, size=base.size))
    res = minimize(
        _penalized,
        x0,
        args=(obj, cfg),
        method="Nelder-Mead",
        options={"maxfev": budget, "fatol": FATOL, "xatol": XATOL, "adaptive": True},
    )
    return StartResult(L, restart, float(res.fun), tuple(float(v) for v in res.x), int(res.nfev), bool(res.success))


@dataclass
class OptimizeReport:
    best: InteractionSchedule
    metrics: MetricsRecord
    evaluations: int
    starts: list[tuple[float, int, float]]
    seed: int
    objective: Objective
    best_objective: float
    budget: int
    cutoff: int
    budget_exhausted: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "metrics": self.metrics.to_dict(),
            "evaluations": self.evaluations,
            "starts": [list(s) for s in self.starts],
            "seed": self.seed,
            "objective": self.objective.to_dict(),
            "best_objective": self.best_objective,
            "budget": self.budget,
            "cutoff": self.cutoff,
            "budget_exhausted": self.budget_exhausted,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizeReport":
        return cls(
            best=InteractionSchedule.from_dict(d["best"]),
            metrics=MetricsRecord.from_dict(d["metrics"]),
            evaluations=int(d["evaluations"]),
            starts=[tuple(s) for s in d["starts"]],
            seed=int(d["seed"]),
            objective=Objective(**d["objective"]),
            best_objective=float(d["best_objective"]),
            budget=int(d["budget"]),
            cutoff=int(d["cutoff"]),
            budget_exhausted=bool(d.get("budget_exhausted", False)),
            extra=dict(d.get("extra", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OptimizeReport":
        return cls.from_dict(json.loads(text))


def optimize(
    N: int,
    obj: Objective | None = None,
    seed: int = 0,
    cfg: FockConfig | None = None,
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
    L_grid=DEFAULT_L_GRID,
    restarts: int = RESTARTS_PER_L,
) -> OptimizeReport:
    """Optimize the 2N gate strengths from jittered analytic seeds.

    Each ``L`` in ``L_grid`` seeds ``restarts`` Nelder-Mead runs, each perturbed
    by seeded uniform jitter of +-5% per coordinate. ``budget`` caps the
    evaluations of every start. The unperturbed analytic schedules are also
    candidates, so the result is never worse than the best of them. Ties go
    to the smaller ``L``, then to the lexicographically smaller parameters.
    """
    obj = obj or Objective()
    cfg = cfg or FockConfig()
    if not 1 <= N <= 6:
        raise ValueError(f"N must lie in [1, 6], got {N}")
    if budget < 2000:
        raise ValueError(f"budget must be >= 2000 evaluations, got {budget}")

    tasks = [
        (N, float(L), li, r, obj, int(seed), cfg, int(budget))
        for li, L in enumerate(L_grid)
        for r in range(restarts)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_start, tasks))
    else:
        results = [_run_start(t) for t in tasks]

    analytic = []
    for L in L_grid:
        x = analytic_schedule(N, float(L)).as_vector()
        analytic.append((_penalized(x, obj, cfg), float(L), tuple(float(v) for v in x)))

    candidates = [(r.objective, r.L, r.x) for r in results] + analytic
    best_obj, best_L, best_x = min(candidates)
    if best_obj > min(a[0] for a in analytic):
        raise AssertionError("optimized schedule is worse than an analytic seed")
    if best_obj >= PENALTY:
        raise LeakError("every start leaked or failed the postselection guard; raise the cutoff")

    best = InteractionSchedule(best_x[: N], best_x[N:], best_L)
    winner = next((r for r in results if r.x == best_x), None)
    result = run_unitary(best, cfg)
    state = result.branch(obj.postselected)
    metrics = evaluate(
        state,
        N=N,
        postselected=obj.postselected,
        postselect_prob=result.postselect_prob,
    )
    return OptimizeReport(
        best=best,
        metrics=metrics,
        evaluations=sum(r.evaluations for r in results) + len(analytic),
        starts=[(r.L, r.restart, r.objective) for r in results],
        seed=int(seed),
        objective=obj,
        best_objective=float(best_obj),
        budget=int(budget),
        cutoff=cfg.cutoff,
        budget_exhausted=bool(winner is not None and not winner.converged and winner.evaluations >= budget),
    )


@dataclass(frozen=True)
class WSweepRow:
    w: float
    squeeze_db: float
    antisqueeze_db: float
    schedule: InteractionSchedule

    @property
    def excess_db(self) -> float:
        """Anti-squeezing beyond the minimum-uncertainty value, ``|antisqueeze| - squeeze``."""
        return abs(self.antisqueeze_db) - self.squeeze_db


def w_sweep(
    N: int,
    w_grid,
    seed: int = 0,
    cfg: FockConfig | None = None,
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
    **kwargs,
) -> list[WSweepRow]:
    """One weighted optimization per ``w``; ``w = 0`` is the plain squeezing objective."""
    rows = []
    for w in w_grid:
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"w must lie in [0, 1], got {w!r}")
        obj = Objective() if w == 0 else Objective.weighted(float(w))
        rep = optimize(N, obj, seed=seed, cfg=cfg, budget=budget, jobs=jobs, **kwargs)
        rows.append(WSweepRow(float(w), rep.metrics.squeeze_db, rep.metrics.antisqueeze_db, rep.best))
    return rows


def excess_monotone(rows, jitter: float = 0.2) -> bool:
    """Excess anti-squeezing is non-increasing in ``w`` up to ``jitter`` dB."""
    ex = [r.excess_db for r in sorted(rows, key=lambda r: r.w)]
    return all(b <= a + jitter for a, b in zip(ex, ex[1:]))


def refine_under_noise(s: InteractionSchedule, obj: Objective, noise, cfg=None, budget: int = 200, dt=None):
    """Single-start Nelder-Mead polish of ``s`` with the noisy simulation in the loop.

    Each evaluation is a full master-equation run, so budgets stay small.
    """
    from .lindblad import run_noisy_protocol
    from .metrics import moments

    cfg = cfg or FockConfig()

    def f(x):
        try:
            res = run_noisy_protocol(InteractionSchedule.from_vector(x), noise, cfg, dt)
        except LeakError:
            return PENALTY
        if obj.postselected and res.postselect_prob < MIN_POSTSELECT_PROB:
            return PENALTY
        _, _, var_x, var_p = moments(res.branch(obj.postselected))
        return obj.from_variances(var_x, var_p)

    res = minimize(f, s.as_vector(), method="Nelder-Mead", options={"maxfev": budget, "adaptive": True})
    x = res.x if res.fun <= f(s.as_vector()) else s.as_vector()
    return InteractionSchedule.from_vector(x, s.L)
