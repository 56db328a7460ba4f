"""Background-gas collisions: cold gas barely matters, hot gas does.

Each trial kicks one ion with a thermal gas-atom momentum transfer,
relaxes the crystal under damped dynamics, and reports how far the
final configuration sits from the reference, both index-by-index (raw)
and after optimal relabeling (matched).  Hopping ions inflate the raw
number only.

Run:  python3 demos/demo_collisions.py [out_dir]
(20 trials per temperature here; the full acceptance run uses 100.)
"""

import sys
import time
from pathlib import Path

from ion2d.crystal import TrapParams, solve_equilibrium
from ion2d.stability import (CollisionConfig, GasSpecies, run_collision_trials,
                             trials_to_csv)
from ion2d.units import YB171

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
out.mkdir(parents=True, exist_ok=True)

trap = TrapParams.from_frequencies_hz(0.69e6, 2.140e6, 0.167e6)
crystal = solve_equilibrium(trap, YB171, 64, seed=3)
cfg = CollisionConfig(gamma=8.0e3, t_evolve=500e-6, dt=2e-9, n_trials=20,
                      thresholds=(0.5e-6, 1.0e-6))

for temp in (6.1, 300.0):
    t0 = time.time()
    res = run_collision_trials(crystal, trap, GasSpecies(temp), cfg, seed=17)
    exc_m = res.exceedance(matched=True)
    exc_r = res.exceedance(matched=False)
    print(f"T = {temp:6.1f} K  ({time.time() - t0:.0f} s, "
          f"{res.n_failed} aborted)")
    print(f"  typical gas speed {res.gas_speed.mean():7.1f} m/s")
    for th in cfg.thresholds:
        print(f"  > {th * 1e6:3.1f} um:  matched {exc_m[th]:4.2f}   "
              f"raw {exc_r[th]:4.2f}")
    trials_to_csv(res, out / f"collide_{temp:g}K.csv")

print(f"wrote per-trial tables to {out}")
