"""
One flight, three rate controllers
==================================

Generate one random flight, run Minstrel-HT, TARA and Ideal on it, and
look at how the relay-link throughput tracks the distance.
"""

import numpy as np

from tarasim import ScenarioConfig, generate_scenario, run_simulation

seed = 7
scenario = generate_scenario(ScenarioConfig(seed=seed, run_duration=300.0))
runs = {a: run_simulation(scenario, a) for a in ("minstrel", "tara", "ideal")}

for name, m in runs.items():
    print(f"{name:9s} relay {m.mean_throughput[1] / 1e6:6.2f} Mb/s   "
          f"attempts {m.attempts[1]:7d}   retry drops {m.retry_drops[1]}")

# 30 s averages next to the relay distance
print("\n  t    dist  minstrel    tara   ideal   (Mb/s)")
dist = runs["tara"].distance[1]
for t0 in range(0, 300, 30):
    s = slice(t0, t0 + 30)
    cols = [runs[a].throughput("relay")[s].mean() / 1e6 for a in ("minstrel", "tara", "ideal")]
    print(f"{t0:3d} {dist[s].mean():7.1f}  " + "  ".join(f"{c:6.2f}" for c in cols))

# how often does each controller open its retry chain at the best MCS?
fs = {a: m.first_stage_per_second()[1] for a, m in runs.items()}
agree = np.mean(fs["tara"] == fs["ideal"])
print(f"\nTARA picks Ideal's first-stage MCS in {100 * agree:.0f}% of seconds")
