"""
Seed sweep statistics
=====================

Paired runs over 20 seeds: per-seed gains, pooled CCDF percentiles and a
99% confidence interval on the mean. The full 100-seed sweep is
``tarasim run --seeds 1..100`` followed by ``tarasim analyze``.
"""

import numpy as np

from tarasim import ScenarioConfig, run_batch
from tarasim.analysis import ccdf, ccdf_percentile, gains, mean_ci99

seeds = range(1, 21)
results = run_batch(ScenarioConfig(run_duration=300.0), ["minstrel", "tara", "ideal"], list(seeds))

means = {a: {(s, "relay"): results[(s, a)].mean_throughput[1] for s in seeds}
         for a in ("minstrel", "tara", "ideal")}

for a, d in means.items():
    m, h = mean_ci99(list(d.values()))
    print(f"{a:9s} {m / 1e6:6.2f} ± {h / 1e6:4.2f} Mb/s (99% CI)")

g = gains(means["tara"], means["minstrel"])
print(f"\nTARA vs Minstrel: mean gain {g.mean_gain:+.2f}%, positive on {100 * g.positive_fraction:.0f}% of seeds")
print("per-seed gains:", np.round(g.values, 1))

pooled = {a: ccdf(np.concatenate([results[(s, a)].throughput("relay") for s in seeds]))
          for a in ("minstrel", "tara")}
print("\n        minstrel     tara   (Mb/s exceeded q% of the time)")
for q in (70, 50, 30):
    lo, hi = (ccdf_percentile(pooled[a], q) / 1e6 for a in ("minstrel", "tara"))
    print(f"q={q}%   {lo:7.2f}  {hi:7.2f}   {100 * (hi - lo) / lo:+.1f}%")
