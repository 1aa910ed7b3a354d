"""Optimized squeezing for N = 1..N_max, deterministic and postselected."""

from _common import fock_choice, parser, table

from rabi_squeeze.sweeps import STEP_COLUMNS, squeezing_vs_steps

ap = parser(__doc__)
ap.add_argument("--n-max", type=int, default=5)
args = ap.parse_args()

cfg, cfg_for_N = fock_choice(args.cutoff)
rows = squeezing_vs_steps(args.n_max, args.seed, cfg, args.budget, args.cache_dir, args.jobs, cfg_for_N)
print(table(STEP_COLUMNS, [[getattr(r, c) for c in STEP_COLUMNS] for r in rows]))
steps = [b.deterministic_db - a.deterministic_db for a, b in zip(rows, rows[1:])]
print("per-step gain (dB):", ", ".join(f"{s:.2f}" for s in steps))
