"""Sideband thermometry: from fluorescence counts to phonon occupation.

The red/blue sideband asymmetry gives nbar = P_r / (P_b - P_r); with
count levels it becomes (N_max - N_r) / (N_r - N_b) and the shared
bright level drops out.  Pooling a scan window before dividing keeps
the Poisson error propagation honest.

Run:  python3 demos/demo_sideband.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from ion2d import sideband

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
out.mkdir(parents=True, exist_ok=True)
TWO_PI = 2 * np.pi

# COM probe on a 64-ion crystal: uniform mode vector 1/8
drive = sideband.SidebandDrive(duration=80e-6, rabi=TWO_PI * 50e3,
                               eta=0.11365, mode_vector=np.full(64, 0.125))
nbar_true = 0.8
c = sideband.expected_counts(nbar_true, drive, np.full(64, 1.0))
scale = 1e5 / (c.n_max + c.n_r + c.n_b)
c = sideband.expected_counts(nbar_true, drive, np.full(64, scale))
print(f"count levels at nbar = {nbar_true}: all-bright {c.n_max:.0f}, "
      f"red {c.n_r:.0f}, blue {c.n_b:.0f}")
print(f"noise-free inversion: {sideband.estimate_nbar_counts(c):.12f}")

# Poisson shots
rng = np.random.default_rng(5)
levels = np.array([c.n_max, c.n_r, c.n_b])
draws = rng.poisson(np.broadcast_to(levels, (1000, 3)))
est = np.array([sideband.estimate_nbar_counts(sideband.PhotonCounts(*d))
                for d in draws])
print(f"Poisson MC over 1000 shots: median {np.median(est):.3f}, "
      f"central 68% [{np.quantile(est, 0.16):.3f}, "
      f"{np.quantile(est, 0.84):.3f}]")

# windowed scan with propagated errors
nbar, sigma = sideband.estimate_nbar_counts_pooled(
    draws[:3, 0], draws[:3, 1], draws[:3, 2], with_error=True)
print(f"3-point pooled window: nbar = {nbar:.3f} +- {sigma:.3f}")

# write a synthetic scan file and run the per-mode estimator on it
det = np.arange(-300.0, 301.0, 100.0)
rows = ["detuning_hz,red_counts,blue_counts,n_max"]
for d in det:
    nb = 0.5 if d < 50.0 else 1.5
    cc = sideband.expected_counts(nb, drive, np.full(64, scale / 10))
    rr = rng.poisson([cc.n_r, cc.n_b, cc.n_max])
    rows.append(f"{d},{rr[0]},{rr[1]},{rr[2]}")
scan_path = out / "scan.csv"
scan_path.write_text("\n".join(rows) + "\n")
res = sideband.estimate_scan(*sideband.read_scan_csv(scan_path),
                             mode_centers=[-200.0, 200.0])
for r in res:
    print(f"scan window at {r['center_hz']:+.0f} Hz: "
          f"nbar = {r['nbar']:.2f} +- {r['sigma']:.2f} (points {r['points']})")
print(f"wrote {scan_path}")
