"""Drive the whole pipeline through the command-line interface.

Every stage reads a JSON config plus --seed/--out flags and leaves its
outputs (and a resolved-config echo) in the output directory, so stages
chain through files: crystal -> modes -> jij -> anneal.

Run:  python3 demos/demo_pipeline_cli.py [out_dir]
"""

import json
import sys
from pathlib import Path

from ion2d.cli import main

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
out = out / "pipeline"
out.mkdir(parents=True, exist_ok=True)


def stage(name, config, *extra):
    cfg_path = out / f"{name.split()[0]}_cfg.json"
    cfg_path.write_text(json.dumps(config, indent=1))
    argv = name.split() + ["--config", str(cfg_path), "--out", str(out), *extra]
    print(f"$ ion2d {' '.join(argv)}")
    rc = main(argv)
    assert rc == 0, rc


stage("crystal", {"crystal": {"n": 40, "trap_khz": [690.0, 2140.0, 167.0]}},
      "--seed", "1")
stage("modes", {"modes": {"top_m": 8}})
stage("jij", {"jij": {"tones": [
    {"mode": 4, "detuning_khz": 1.0, "omega_eff_khz": 10.0}]}})
stage("anneal", {"anneal": {"m_repeats": 20, "convention": "angular"}},
      "--seed", "2")
stage("dynamics dicke", {"dynamics": {
    "n": 40, "j0_khz": 0.31, "b0_khz": 0.44, "t_total_ms": 5.0}})
stage("collide", {"collide": {
    "temperature_k": 300.0, "t_evolve_us": 100.0, "dt_ns": 2.0,
    "n_trials": 10}}, "--seed", "7")

print("\nartifacts:")
for p in sorted(out.iterdir()):
    print(f"  {p.name}")
