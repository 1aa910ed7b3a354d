"""Shared argument handling for the experiment scripts."""

import argparse
import os

DEFAULT_CACHE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), ".rabi_squeeze_cache")


def parser(description):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budget", type=int, default=20000)
    ap.add_argument("--cutoff", type=int, default=None, help="Fock cutoff (default: per-N)")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--cache-dir", default=DEFAULT_CACHE)
    return ap


def fock_choice(cutoff):
    """``(cfg, cfg_for_N)``: a fixed config when a cutoff is given, else the per-N default."""
    from rabi_squeeze.hilbert import FockConfig
    from rabi_squeeze.sweeps import steps_config

    if cutoff is None:
        return None, steps_config
    return FockConfig(cutoff=cutoff), None


def table(columns, rows):
    widths = [max(len(str(c)), 10) for c in columns]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(columns, widths))]
    for row in rows:
        cells = [f"{v:.3f}" if isinstance(v, float) else str(v) for v in row]
        lines.append("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines)
