"""Figure-level sweeps built from the library calls.

Optimized schedules are cached on disk, keyed by every input that affects
them, so noise sweeps reuse the noiseless optima instead of re-optimizing.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import GridTooSmall, LeakError, UnstableEstimate
from .hilbert import FockConfig
from .lindblad import NoiseKind, NoiseModel, run_noisy_protocol
from .metrics import MetricsRecord, evaluate, fisher_resolved, gaussian_equiv_db, moments, p_density, variance_to_db
from .optimizer import DEFAULT_BUDGET, Objective, OptimizeReport, optimize, refine_under_noise
from .protocol import InteractionSchedule

log = logging.getLogger(__name__)

DEFAULT_GAMMA_GRID = (1e-3, 1e-2, 1e-1)
FISHER_EXAMPLE_GAMMA = 7e-2
LEAK_RETRIES = 2
# cutoffs that hold the optimized N-step outputs; deeper squeezing needs more levels
STEP_CUTOFFS = {5: 250}


def steps_config(N: int, leak_tol: float = 1e-7) -> FockConfig:
    """Default Fock config for an N-step protocol."""
    return FockConfig(cutoff=STEP_CUTOFFS.get(N, FockConfig().cutoff), leak_tol=leak_tol)


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# schedule cache


def cache_key(N: int, w: float, seed: int, cutoff: int, budget: int, postselected: bool) -> str:
    payload = json.dumps(
        {"N": N, "w": float(w), "seed": seed, "cutoff": cutoff, "budget": budget, "postselected": bool(postselected)},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def cached_optimize(
    N: int,
    w: float = 0.0,
    postselected: bool = False,
    seed: int = 0,
    cfg: FockConfig | None = None,
    budget: int = DEFAULT_BUDGET,
    cache_dir: str | os.PathLike | None = None,
    jobs: int = 1,
) -> OptimizeReport:
    cfg = cfg or FockConfig()
    obj = Objective(postselected=postselected) if w == 0 else Objective.weighted(w, postselected)
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"opt_{cache_key(N, w, seed, cfg.cutoff, budget, postselected)}.json"
        if path.exists():
            return OptimizeReport.from_json(path.read_text())
    log.info("optimizing N=%d w=%g postselected=%s (no cached schedule)", N, w, postselected)
    rep = optimize(N, obj, seed=seed, cfg=cfg, budget=budget, jobs=jobs)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(rep.to_json())
        tmp.replace(path)
    return rep


def _optimize_task(args):
    return cached_optimize(*args)


def _cfg_for(N, cfg, cfg_for_N):
    if cfg_for_N is not None:
        return cfg_for_N(N)
    return cfg or FockConfig()


def optimized_schedules(N_values, seed, cfg, budget, cache_dir, jobs, w=0.0, postselected=False, cfg_for_N=None):
    tasks = [(N, w, postselected, seed, _cfg_for(N, cfg, cfg_for_N), budget, cache_dir, 1) for N in N_values]
    return dict(zip(N_values, _map(_optimize_task, tasks, jobs)))


# ---------------------------------------------------------------------------
# Fig. 2: squeezing versus number of steps


@dataclass(frozen=True)
class StepRow:
    N: int
    deterministic_db: float
    postselected_db: float
    deterministic_antisqueeze_db: float
    postselected_antisqueeze_db: float
    postselect_prob: float
    fidelity: float


STEP_COLUMNS = tuple(StepRow.__dataclass_fields__)


def squeezing_vs_steps(
    N_max: int = 5, seed: int = 0, cfg=None, budget=DEFAULT_BUDGET, cache_dir=None, jobs=1, cfg_for_N=None
):
    """Noiseless optimum per N, with the postselected branch optimized separately.

    ``cfg_for_N`` (e.g. ``steps_config``) picks a config per N and overrides ``cfg``.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    tasks = [
        (N, 0.0, post, seed, _cfg_for(N, cfg, cfg_for_N), budget, cache_dir, 1)
        for N in range(1, N_max + 1)
        for post in (False, True)
    ]
    reps = _map(_optimize_task, tasks, jobs)
    rows = []
    for i, N in enumerate(range(1, N_max + 1)):
        det, post = reps[2 * i].metrics, reps[2 * i + 1].metrics
        rows.append(
            StepRow(
                N,
                det.squeeze_db,
                post.squeeze_db,
                det.antisqueeze_db,
                post.antisqueeze_db,
                post.postselect_prob,
                det.fidelity,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Fig. 3 and Fisher sweeps: noisy runs of cached schedules


def safe_evaluate(state, **kw) -> MetricsRecord:
    """``evaluate`` that records NaN Fisher information instead of failing on the density grid."""
    try:
        return evaluate(state, **kw)
    except (GridTooSmall, UnstableEstimate) as exc:
        log.warning("Fisher information unavailable: %s", exc)
        return evaluate(state, with_fisher=False, **kw)


def run_with_headroom(schedule, model, cfg, dt=None, retries=LEAK_RETRIES):
    """``run_noisy_protocol``, enlarging the cutoff by half on each leak (noise such as heating adds excitations)."""
    for attempt in range(retries + 1):
        try:
            return run_noisy_protocol(schedule, model, cfg, dt)
        except LeakError:
            if attempt == retries:
                raise
            cfg = FockConfig(cutoff=int(cfg.cutoff * 1.5), leak_tol=cfg.leak_tol)
            log.info("leak under %s at gamma_T=%g; retrying at cutoff %d", model.kind.value, model.gamma_T, cfg.cutoff)


def _noisy_point(args):
    schedule, kind, gamma, cfg, dt, reoptimize, refine_budget = args
    model = NoiseModel(kind, gamma)
    if reoptimize and not model.is_noiseless:
        schedule = refine_under_noise(schedule, Objective(), model, cfg, refine_budget, dt)
    res = run_with_headroom(schedule, model, cfg, dt)
    common = dict(N=schedule.N, noise_type=model.kind.value, gamma_T=gamma)
    det = safe_evaluate(res.deterministic, postselected=False, postselect_prob=res.postselect_prob, **common)
    if res.postselected is None:
        post = None
    else:
        post = safe_evaluate(res.postselected, postselected=True, postselect_prob=res.postselect_prob, **common)
    return det, post


@dataclass(frozen=True)
class NoiseBest:
    noise_type: str
    gamma_T: float
    best_deterministic_db: float
    best_deterministic_N: int
    best_postselected_db: float
    best_postselected_N: int


BEST_COLUMNS = tuple(NoiseBest.__dataclass_fields__)


def noise_sweep(
    noise_kinds=tuple(k.value for k in NoiseKind if k is not NoiseKind.NONE),
    gamma_grid=DEFAULT_GAMMA_GRID,
    N_range=(1, 2, 3, 4, 5),
    seed: int = 0,
    cfg=None,
    budget=DEFAULT_BUDGET,
    dt=None,
    cache_dir=None,
    jobs=1,
    reoptimize=False,
    refine_budget=200,
    cfg_for_N=None,
):
    """Noisy runs of the noiseless optima for every (kind, gamma_T, N).

    Returns ``(records, best)``: two metrics records (deterministic, postselected)
    per point in grid order, and the best-over-N summary per (kind, gamma_T).
    ``cfg_for_N`` picks a config per N and overrides ``cfg``.
    """
    kinds = [NoiseKind.parse(k).value for k in noise_kinds]
    gammas = [float(g) for g in gamma_grid]
    Ns = [int(n) for n in N_range]
    if not kinds or not gammas or not Ns:
        raise ValueError("empty sweep grid")
    schedules = optimized_schedules(Ns, seed, cfg, budget, cache_dir, jobs, cfg_for_N=cfg_for_N)
    points = [(k, g, N) for k in kinds for g in gammas for N in Ns]
    tasks = [
        (schedules[N].best, k, g, _cfg_for(N, cfg, cfg_for_N), dt, reoptimize, refine_budget) for k, g, N in points
    ]
    results = _map(_noisy_point, tasks, jobs)

    records = []
    best = []
    by_key = {}
    for (k, g, N), (det, post) in zip(points, results):
        records.append(det)
        if post is not None:
            records.append(post)
        by_key.setdefault((k, g), []).append((N, det, post))
    for (k, g), entries in by_key.items():
        d_N, d = max(((N, det.squeeze_db) for N, det, _ in entries), key=lambda t: (t[1], -t[0]))
        posts = [(N, post.squeeze_db) for N, _, post in entries if post is not None]
        p_N, p = max(posts, key=lambda t: (t[1], -t[0])) if posts else (0, float("nan"))
        best.append(NoiseBest(k, g, d, d_N, p, p_N))
    return records, best


@dataclass(frozen=True)
class FisherRow:
    noise_type: str
    gamma_T: float
    fisher: float
    fisher_equiv_db: float
    squeeze_db: float


FISHER_COLUMNS = tuple(FisherRow.__dataclass_fields__)


def _fisher_point(args):
    schedule, kind, gamma, cfg, dt, keep_density = args
    res = run_with_headroom(schedule, NoiseModel(kind, gamma), cfg, dt)
    grid = p_density(res.deterministic) if keep_density else None
    fisher = fisher_resolved(res.deterministic)
    _, _, _, var_p = moments(res.deterministic)
    row = FisherRow(kind, gamma, fisher, gaussian_equiv_db(fisher), variance_to_db(var_p))
    return row, grid


def fisher_sweep(
    noise_kinds=tuple(k.value for k in NoiseKind if k is not NoiseKind.NONE),
    gamma_grid=DEFAULT_GAMMA_GRID,
    N: int = 4,
    seed: int = 0,
    cfg=None,
    budget=DEFAULT_BUDGET,
    dt=None,
    cache_dir=None,
    jobs=1,
    dump_densities=False,
):
    """Classical Fisher information of the deterministic output for each (kind, gamma_T).

    With ``dump_densities`` the p-densities for boson loss and qubit decay at
    gamma_T = 7e-2 are returned as well, keyed by noise kind.
    """
    cfg = cfg or FockConfig()
    kinds = [NoiseKind.parse(k).value for k in noise_kinds]
    gammas = [float(g) for g in gamma_grid]
    if not kinds or not gammas:
        raise ValueError("empty sweep grid")
    schedule = cached_optimize(N, seed=seed, cfg=cfg, budget=budget, cache_dir=cache_dir, jobs=jobs).best
    points = [(k, g) for k in kinds for g in gammas]
    tasks = [(schedule, k, g, cfg, dt, False) for k, g in points]
    examples = [NoiseKind.BOSON_LOSS.value, NoiseKind.QUBIT_DECAY.value] if dump_densities else []
    tasks += [(schedule, k, FISHER_EXAMPLE_GAMMA, cfg, dt, True) for k in examples]
    out = _map(_fisher_point, tasks, jobs)
    rows = [r for r, _ in out[: len(points)]]
    densities = {k: grid for k, (_, grid) in zip(examples, out[len(points) :])}
    return rows, densities


def schedule_from_file(path) -> InteractionSchedule:
    data = json.loads(Path(path).read_text())
    if "best" in data:
        data = data["best"]
    return InteractionSchedule.from_dict(data)
