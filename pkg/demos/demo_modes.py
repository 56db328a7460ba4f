"""Transverse phonon spectrum of the 300-ion crystal.

The out-of-plane (y) modes decouple from in-plane motion for a planar
crystal; the center-of-mass mode sits exactly at the transverse trap
frequency and every other mode is softer.

Run:  python3 demos/demo_modes.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from ion2d import phonons
from ion2d.crystal import TrapParams, solve_equilibrium
from ion2d.units import YB171

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
out.mkdir(parents=True, exist_ok=True)
TWO_PI = 2 * np.pi

trap = TrapParams.from_frequencies_hz(0.69e6, 2.140e6, 0.167e6)
crystal = solve_equilibrium(trap, YB171, 300, seed=1)

delta_k = phonons.counterprop_delta_k(411e-9)
modes = phonons.transverse_modes(crystal, trap, delta_k)

f_khz = modes.frequencies / TWO_PI / 1e3
print(f"COM mode:  {f_khz[0]:.3f} kHz (trap y: {trap.omega_y / TWO_PI / 1e3:.3f})")
print(f"COM vector uniformity: std/mean = "
      f"{modes.vectors[:, 0].std() / np.abs(modes.vectors[:, 0]).mean():.2e}")
print(f"band: {f_khz.min():.1f} .. {f_khz.max():.1f} kHz over {modes.n} modes")

offs = modes.offsets_below_com() / TWO_PI / 1e3
for k in (1, 2, 3, 4, 10, 19, 50, 300):
    print(f"  mode {k:3d}: offset below COM {offs[k - 1]:8.2f} kHz")

print(f"Lamb-Dicke eta at COM: {modes.lamb_dicke[0]:.5f}")
print(f"eta range: {modes.lamb_dicke[0]:.5f} .. {modes.lamb_dicke[-1]:.5f}")

phonons.modes_to_csv(modes, out / "modes.csv")
phonons.mode_vectors_to_csv(modes, out / "mode_vectors.csv")
phonons.modes_to_json(modes, out / "modes.json", top_m=20)
print(f"wrote {out / 'modes.csv'}, {out / 'mode_vectors.csv'}, {out / 'modes.json'}")
