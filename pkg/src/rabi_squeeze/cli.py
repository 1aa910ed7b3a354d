"""``rabi-squeeze`` command-line driver.

Every command reads an optional JSON config, applies flag overrides, validates
the result and writes CSV (plus a JSON report for ``optimize``). Each CSV
starts with ``#`` comment lines holding the resolved config and a timestamp.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .approx import approx_scan
from .errors import IntegratorDiverged, LeakError, RabiSqueezeError
from .hilbert import FockConfig
from .lindblad import NOISE_KINDS, NoiseKind, NoiseModel, run_noisy_protocol
from .metrics import CSV_COLUMNS, fmt
from .optimizer import DEFAULT_BUDGET, Objective
from .sweeps import (
    BEST_COLUMNS,
    FISHER_COLUMNS,
    STEP_COLUMNS,
    cached_optimize,
    fisher_sweep,
    noise_sweep,
    safe_evaluate,
    squeezing_vs_steps,
    steps_config,
)

COMMANDS = ("optimize", "fig2", "fig3", "fisher", "approx-scan")
APPROX_COLUMNS = ("d_alpha", "delta_db_target", "squeeze_db", "antisqueeze_db", "fidelity")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("rabi_squeeze")


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


@dataclass
class RunConfig:
    N: int = 3
    cutoff: int | None = None
    leak_tol: float = 1e-7
    w: float = 0.0
    noise: dict = field(default_factory=lambda: {"kind": "none", "gamma_T": 0.0})
    postselect: bool = False
    seed: int = 0
    dt: float | None = None
    budget: int = DEFAULT_BUDGET
    output_path: str | None = None
    cache_dir: str | None = ".rabi_squeeze_cache"
    N_max: int = 5
    N_range: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    noise_kinds: list = field(default_factory=lambda: [k.value for k in NOISE_KINDS])
    gamma_grid: list = field(default_factory=lambda: [1e-3, 1e-2, 1e-1])
    fisher_N: int = 4
    dump_densities: bool = False
    reoptimize_under_noise: bool = False
    refine_budget: int = 200
    d_alpha_grid: list = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5])
    delta_db_grid: list = field(default_factory=lambda: [3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0])
    trunc_tol: float = 1e-10

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fock(self, N: int | None = None) -> FockConfig:
        """Explicit cutoff if set, else the per-N default."""
        if self.cutoff is None:
            return steps_config(N or self.N, self.leak_tol)
        return FockConfig(cutoff=self.cutoff, leak_tol=self.leak_tol)

    def fock_for_N(self):
        """Per-N config chooser for sweeps, or ``None`` when a cutoff is fixed."""
        return None if self.cutoff is not None else (lambda N: self.fock(N))

    def noise_model(self) -> NoiseModel:
        noise = dict(self.noise)
        extra = set(noise) - {"kind", "gamma_T", "decay_to"}
        if extra:
            raise ConfigError(f"unknown noise keys: {', '.join(sorted(extra))}")
        return NoiseModel(noise.get("kind", "none"), float(noise.get("gamma_T", 0.0)), int(noise.get("decay_to", 0)))

    def validate(self, command: str) -> None:
        """Check the fields the command uses; raise ``ConfigError`` on the first problem."""
        try:
            self.fock()
            self.noise_model()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        _check(_is_int(self.seed) and self.seed >= 0, "seed must be a non-negative integer")
        _check(_is_int(self.budget) and self.budget >= 2000, "budget must be an integer >= 2000")
        _check(self.dt is None or (_is_real(self.dt) and self.dt > 0), "dt must be positive or null")
        if command == "optimize":
            _check(_is_int(self.N) and 1 <= self.N <= 6, f"N must be an integer in [1, 6], got {self.N!r}")
            _check(_is_real(self.w) and 0 <= self.w <= 1, "w must lie in [0, 1]")
            _check(isinstance(self.postselect, bool), "postselect must be a boolean")
        elif command == "fig2":
            _check(_is_int(self.N_max) and 1 <= self.N_max <= 6, "N_max must be an integer in [1, 6]")
        elif command in ("fig3", "fisher"):
            _check_grid(self.noise_kinds, "noise_kinds")
            for k in self.noise_kinds:
                try:
                    NoiseKind.parse(k)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
            _check_grid(self.gamma_grid, "gamma_grid")
            _check(all(_is_real(g) and g >= 0 for g in self.gamma_grid), "gamma_grid entries must be >= 0")
            if command == "fig3":
                _check_grid(self.N_range, "N_range")
                _check(all(_is_int(n) and 1 <= n <= 6 for n in self.N_range), "N_range entries must lie in [1, 6]")
                _check(_is_int(self.refine_budget) and self.refine_budget > 0, "refine_budget must be positive")
            else:
                _check(_is_int(self.fisher_N) and 1 <= self.fisher_N <= 6, "fisher_N must lie in [1, 6]")
        elif command == "approx-scan":
            _check_grid(self.d_alpha_grid, "d_alpha_grid")
            _check_grid(self.delta_db_grid, "delta_db_grid")
            _check(all(_is_real(d) and d > 0 for d in self.d_alpha_grid), "d_alpha_grid entries must be > 0")
            _check(all(_is_real(d) and d > 0 for d in self.delta_db_grid), "delta_db_grid entries must be > 0")
            _check(_is_real(self.trunc_tol) and 0 < self.trunc_tol < 1, "trunc_tol must lie in (0, 1)")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check(ok: bool, msg: str) -> None:
    if not ok:
        raise ConfigError(msg)


def _check_grid(grid, name: str) -> None:
    _check(isinstance(grid, list) and len(grid) > 0, f"{name} must be a non-empty list")


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output


def csv_text(config: RunConfig, command: str, columns, rows, timestamp: bool = True) -> str:
    """CSV body with the resolved config as a ``#`` comment; only the timestamp line varies between reruns."""
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    buf.write(f"# command {command}\n")
    buf.write(f"# config {json.dumps(config.to_dict(), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _row(obj, columns):
    return [getattr(obj, c) for c in columns]


def _out(config: RunConfig, default: str) -> Path:
    return Path(config.output_path or default)


# ---------------------------------------------------------------------------
# commands


def cmd_optimize(config: RunConfig, jobs: int) -> Path:
    """JSON report at the output path and one metrics row appended to the sibling CSV."""
    cfg = config.fock(config.N)
    out = _out(config, f"optimize_N{config.N}_w{config.w:g}.json")
    rep = cached_optimize(config.N, config.w, config.postselect, config.seed, cfg, config.budget, config.cache_dir, jobs)
    model = config.noise_model()
    record = rep.metrics
    if not model.is_noiseless:
        res = run_noisy_protocol(rep.best, model, cfg, config.dt)
        record = safe_evaluate(
            res.branch(config.postselect),
            N=config.N,
            noise_type=model.kind.value,
            gamma_T=model.gamma_T,
            postselected=config.postselect,
            postselect_prob=res.postselect_prob,
        )
    report = rep.to_dict()
    report["config"] = config.to_dict()
    report["row"] = record.to_dict()
    _write(out, json.dumps(report, indent=2, sort_keys=True) + "\n")

    csv_path = out.with_suffix(".csv")
    if csv_path.exists():
        with csv_path.open("a") as fh:
            fh.write(",".join(record.csv_row()) + "\n")
    else:
        _write(csv_path, csv_text(config, "optimize", CSV_COLUMNS, [_row(record, CSV_COLUMNS)]))
    return out


def cmd_fig2(config: RunConfig, jobs: int) -> Path:
    rows = squeezing_vs_steps(
        config.N_max, config.seed, config.fock(), config.budget, config.cache_dir, jobs, config.fock_for_N()
    )
    out = _out(config, "fig2.csv")
    _write(out, csv_text(config, "fig2", STEP_COLUMNS, [_row(r, STEP_COLUMNS) for r in rows]))
    return out


def cmd_fig3(config: RunConfig, jobs: int) -> Path:
    """Per-point metrics rows at the output path, best-over-N summary in ``*_best.csv``."""
    records, best = noise_sweep(
        config.noise_kinds,
        config.gamma_grid,
        config.N_range,
        config.seed,
        config.fock(),
        config.budget,
        config.dt,
        config.cache_dir,
        jobs,
        config.reoptimize_under_noise,
        config.refine_budget,
        config.fock_for_N(),
    )
    out = _out(config, "fig3.csv")
    _write(out, csv_text(config, "fig3", CSV_COLUMNS, [_row(r, CSV_COLUMNS) for r in records]))
    _write(
        out.with_name(out.stem + "_best.csv"),
        csv_text(config, "fig3", BEST_COLUMNS, [_row(b, BEST_COLUMNS) for b in best]),
    )
    return out


def cmd_fisher(config: RunConfig, jobs: int) -> Path:
    rows, densities = fisher_sweep(
        config.noise_kinds,
        config.gamma_grid,
        config.fisher_N,
        config.seed,
        config.fock(config.fisher_N),
        config.budget,
        config.dt,
        config.cache_dir,
        jobs,
        config.dump_densities,
    )
    out = _out(config, "fisher.csv")
    _write(out, csv_text(config, "fisher", FISHER_COLUMNS, [_row(r, FISHER_COLUMNS) for r in rows]))
    for kind, grid in densities.items():
        _write(
            out.with_name(f"{out.stem}_density_{kind}.csv"),
            csv_text(config, "fisher", ("p", "density"), zip(grid.points, grid.values)),
        )
    return out


def cmd_approx_scan(config: RunConfig, jobs: int) -> Path:
    rows = approx_scan(config.d_alpha_grid, config.delta_db_grid, trunc_tol=config.trunc_tol)
    out = _out(config, "approx_scan.csv")
    _write(out, csv_text(config, "approx-scan", APPROX_COLUMNS, [_row(r, APPROX_COLUMNS) for r in rows]))
    return out


DISPATCH = {
    "optimize": cmd_optimize,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "fisher": cmd_fisher,
    "approx-scan": cmd_approx_scan,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rabi-squeeze", description="Squeezing from qubit-oscillator Rabi interactions.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--jobs", type=int, default=None, help="worker processes (default: all processors)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="output path (overrides output_path)")
    ap.add_argument("--N", type=int, default=None, help="number of steps for optimize")
    ap.add_argument("--cutoff", type=int, default=None)
    ap.add_argument("--budget", type=int, default=None)
    ap.add_argument("--cache-dir", default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        for key, value in (
            ("seed", args.seed),
            ("output_path", args.out),
            ("N", args.N),
            ("cutoff", args.cutoff),
            ("budget", args.budget),
            ("cache_dir", args.cache_dir),
        ):
            if value is not None:
                setattr(config, key, value)
        config.validate(args.command)
        jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"rabi-squeeze: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = DISPATCH[args.command](config, jobs)
    except ConfigError as exc:
        print(f"rabi-squeeze: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LeakError, IntegratorDiverged, RabiSqueezeError) as exc:
        print(f"rabi-squeeze: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
