"""Squeezing and fidelity of the coherent-state lattice against its squeezed-vacuum target."""

import argparse

import numpy as np
from _common import table

from rabi_squeeze.approx import approx_scan

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--d-alpha", type=float, nargs="+", default=[0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5])
ap.add_argument("--delta-db", type=float, nargs="+", default=[3, 4, 5, 6, 8, 10, 12, 15, 20])
args = ap.parse_args()

rows = approx_scan(args.d_alpha, args.delta_db)
cols = ("d_alpha", "delta_db_target", "squeeze_db", "antisqueeze_db", "fidelity")
print(table(cols, [[getattr(r, c) for c in cols] for r in rows]))
err = np.array([r.squeeze_db - r.delta_db_target for r in rows]).reshape(len(args.d_alpha), len(args.delta_db))
print("\nsqueeze_db - target (rows: d_alpha, columns: target dB)")
print(table(["d_alpha"] + [f"{d:g}" for d in args.delta_db], [[da, *map(float, e)] for da, e in zip(args.d_alpha, err)]))
