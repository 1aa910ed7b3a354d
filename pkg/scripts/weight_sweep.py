"""Squeezing and anti-squeezing of the N=3 optimum as the anti-squeezing weight w grows."""

from _common import fock_choice, parser, table

from rabi_squeeze.optimizer import excess_monotone
from rabi_squeeze.sweeps import cached_optimize

ap = parser(__doc__)
ap.add_argument("--N", type=int, default=3)
ap.add_argument("--w", type=float, nargs="+", default=[0.0, 0.2, 0.4, 0.5, 0.6, 0.65, 0.7])
args = ap.parse_args()

cfg, cfg_for_N = fock_choice(args.cutoff)
cfg = cfg or cfg_for_N(args.N)
rows = []
for w in args.w:
    m = cached_optimize(args.N, w, False, args.seed, cfg, args.budget, args.cache_dir, args.jobs).metrics
    rows.append((w, m.squeeze_db, m.antisqueeze_db, abs(m.antisqueeze_db) - m.squeeze_db))
print(table(("w", "squeeze_db", "antisqueeze_db", "excess_db"), rows))
