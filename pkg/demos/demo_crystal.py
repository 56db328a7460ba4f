"""Solve a 300-ion planar crystal and look at its geometry.

Run:  python3 demos/demo_crystal.py [out_dir]
"""

import sys
import time
from pathlib import Path

import numpy as np

from ion2d.crystal import (TrapParams, crystal_to_csv, crystal_to_json,
                           max_out_of_plane, nearest_neighbor_spacing,
                           solve_equilibrium, unit_system_for)
from ion2d.units import YB171

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
out.mkdir(parents=True, exist_ok=True)

trap = TrapParams.from_frequencies_hz(0.69e6, 2.140e6, 0.167e6)
us = unit_system_for(trap, YB171)
print(f"trap (MHz): {np.array(trap.omegas()) / 2 / np.pi / 1e6}")
print(f"length unit l0 = {us.length * 1e6:.3f} um")
print(f"planar regime: {trap.is_planar_regime}")

t0 = time.time()
crystal = solve_equilibrium(trap, YB171, 300, seed=1)
print(f"solved 300 ions in {time.time() - t0:.1f} s")

r = np.linalg.norm(crystal.positions[:, [0, 2]], axis=1)
print(f"crystal radius      {r.max() * 1e6:8.2f} um")
print(f"nn spacing          {nearest_neighbor_spacing(crystal) * 1e6:8.2f} um")
print(f"max out of plane    {max_out_of_plane(crystal) * 1e6:8.2e} um")

# restarting from the solved positions converges immediately
again = solve_equilibrium(trap, YB171, 300, init=crystal.positions)
drift = np.abs(again.positions - crystal.positions).max()
print(f"restart drift       {drift:8.2e} m")

crystal_to_json(crystal, trap, out / "crystal.json")
crystal_to_csv(crystal, out / "crystal.csv")
print(f"wrote {out / 'crystal.json'} and {out / 'crystal.csv'}")
