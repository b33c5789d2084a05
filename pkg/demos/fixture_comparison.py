"""Train the RL mapper on the 16-core fixture and compare it with the baselines.

Run: python demos/fixture_comparison.py [n_seeds]
Ten seeds (the full fixture) take a couple of minutes; the default is three.
"""

import sys

import numpy as np

from relmap.config import bundled_config
from relmap.harness import compare, train

cfg = bundled_config("fixture16")
seeds = list(cfg.run.seeds)[: int(sys.argv[1]) if len(sys.argv) > 1 else 3]

# a single training run, to show the exploration schedule and reward trend
res = train(cfg, seed=seeds[0])
for row in res.curve[:: max(1, len(res.curve) // 5)]:
    print(f"episode {row['episode']:3d}  eps {row['epsilon']:.3f}  combined MTTF {row['combined_mttf_years']:.3f} y")

rep = compare(cfg, ["rl", "random", "tc_greedy"], seeds)
print(f"\nseeds {seeds}")
print(f"{'mapper':<10}" + "".join(f"{m:>10}" for m in rep.MECHS) + f"{'spread K':>10}")
for lab, row in rep.table().items():
    spread = float(np.mean(rep.final_spread[lab]))
    print(f"{lab:<10}" + "".join(f"{row[m]:10.3f}" for m in rep.MECHS) + f"{spread:10.2f}")
print(f"\nrl vs random:    {rep.improvement('rl', 'random'):+.1%}")
print(f"rl vs tc_greedy: {rep.improvement('rl', 'tc_greedy'):+.1%}")
