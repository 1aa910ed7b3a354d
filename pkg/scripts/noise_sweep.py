"""Noisy runs of the noiseless optima over noise kind, rate and N; best N per (kind, rate)."""

from _common import fock_choice, parser, table

from rabi_squeeze.sweeps import BEST_COLUMNS, DEFAULT_GAMMA_GRID, noise_sweep

ap = parser(__doc__)
ap.add_argument("--gamma", type=float, nargs="+", default=list(DEFAULT_GAMMA_GRID))
ap.add_argument("--N", type=int, nargs="+", default=[1, 2, 3, 4, 5])
ap.add_argument("--reoptimize", action="store_true")
args = ap.parse_args()

kinds = ["boson_loss", "boson_dephasing", "boson_heating", "qubit_decay", "qubit_dephasing"]
cfg, cfg_for_N = fock_choice(args.cutoff)
records, best = noise_sweep(
    kinds, args.gamma, args.N, args.seed, cfg, args.budget,
    cache_dir=args.cache_dir, jobs=args.jobs, reoptimize=args.reoptimize, cfg_for_N=cfg_for_N,
)
print(table(BEST_COLUMNS, [[getattr(b, c) for c in BEST_COLUMNS] for b in best]))
