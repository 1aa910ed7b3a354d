"""Classical Fisher information of the N=4 optimum under each noise kind."""

from _common import fock_choice, parser, table

from rabi_squeeze.sweeps import FISHER_COLUMNS, fisher_sweep

ap = parser(__doc__)
ap.add_argument("--gamma", type=float, nargs="+", default=[1e-3, 1e-2, 7e-2, 1e-1, 7e-1])
ap.add_argument("--N", type=int, default=4)
args = ap.parse_args()

cfg, cfg_for_N = fock_choice(args.cutoff)
cfg = cfg or cfg_for_N(args.N)
kinds = ["boson_loss", "boson_dephasing", "boson_heating", "qubit_decay", "qubit_dephasing"]
rows, _ = fisher_sweep(kinds, args.gamma, args.N, args.seed, cfg, args.budget,
                       cache_dir=args.cache_dir, jobs=args.jobs)
print(table(FISHER_COLUMNS, [[getattr(r, c) for c in FISHER_COLUMNS] for r in rows]))
