"""Command-line pipeline: crystal -> modes -> jij -> anneal/dynamics, plus
collision trials, sideband-scan thermometry, and sample testing.

Every stage reads a JSON config (frequencies in ordinary kHz; angular
conversion is internal), takes an explicit --seed when it is randomized,
and writes its outputs under --out with fixed names so stages chain by
default.  A resolved-config echo is written next to each stage's outputs.
Identical config and seed give byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, annealing, crystal, ising, phonons, sideband, spindyn, stability
from .errors import Ion2dError
from .units import AMU, YB171, IonSpecies

TWO_PI = 2.0 * math.pi


class ConfigError(Exception):
    """Bad or missing configuration; exits with code 2."""


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _section(cfg: dict, name: str, allowed: dict) -> dict:
    """Pull one stage section, applying defaults and rejecting unknown keys.

    ``allowed`` maps key -> default; a default of ``_REQUIRED`` marks a
    mandatory key.
    """
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown keys in config section {name!r}: {sorted(unknown)}")
    out = {}
    for key, default in allowed.items():
        if key in sec:
            out[key] = sec[key]
        elif default is _REQUIRED:
            raise ConfigError(f"config section {name!r} is missing required key {key!r}")
        else:
            out[key] = default
    return out


_REQUIRED = object()


def _require_seed(args) -> int:
    if args.seed is None:
        raise ConfigError("this stage is randomized: --seed is required")
    return args.seed


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_path(value, out: Path, default_name: str) -> Path:
    path = Path(value) if value is not None else out / default_name
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    return path


def _echo_config(out: Path, stage: str, resolved: dict, args):
    doc = {"stage": stage, "version": __version__, "seed": args.seed,
           "workers": args.workers, "config": resolved}
    with open(out / f"{stage}_config_resolved.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _species_from_config(spec) -> IonSpecies:
    if spec is None:
        return YB171
    if not isinstance(spec, dict) or set(spec) - {"mass_amu", "charge_e"}:
        raise ConfigError("species must be {mass_amu, charge_e}")
    try:
        return IonSpecies(mass=float(spec["mass_amu"]) * AMU,
                          charge=float(spec.get("charge_e", 1.0)) * 1.602176634e-19)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad species: {exc}")


# ---------------------------------------------------------------------------
# stages


def run_crystal(args, cfg) -> int:
    sec = _section(cfg, "crystal", {
        "n": _REQUIRED, "trap_khz": _REQUIRED, "species": None,
        "tol_force": 1e-10,
    })
    seed = _require_seed(args)
    trap_khz = sec["trap_khz"]
    if (not isinstance(trap_khz, (list, tuple))) or len(trap_khz) != 3:
        raise ConfigError("trap_khz must be [fx, fy, fz] in kHz")
    try:
        trap = crystal.TrapParams.from_frequencies_hz(*(1e3 * float(f) for f in trap_khz))
        species = _species_from_config(sec["species"])
        n = int(sec["n"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    out = _out_dir(args)
    _echo_config(out, "crystal", sec, args)
    solved = crystal.solve_equilibrium(trap, species, n, seed=seed,
                                       tol_force=float(sec["tol_force"]))
    crystal.crystal_to_json(solved, trap, out / "crystal.json")
    crystal.crystal_to_csv(solved, out / "crystal.csv")
    spacing = crystal.nearest_neighbor_spacing(solved) if n > 1 else float("nan")
    print(f"crystal: n={n} spacing={spacing * 1e6:.3f}um "
          f"max|y|={crystal.max_out_of_plane(solved) * 1e6:.2e}um -> {out / 'crystal.json'}")
    return 0


def run_modes(args, cfg) -> int:
    sec = _section(cfg, "modes", {
        "crystal": None, "wavelength_nm": 411.0, "top_m": 10,
    })
    out = _out_dir(args)
    _echo_config(out, "modes", sec, args)
    cr, trap = crystal.crystal_from_json(
        _resolve_path(sec["crystal"], out, "crystal.json"))
    delta_k = phonons.counterprop_delta_k(float(sec["wavelength_nm"]) * 1e-9)
    modes = phonons.transverse_modes(cr, trap, delta_k)
    phonons.modes_to_csv(modes, out / "modes.csv")
    phonons.mode_vectors_to_csv(modes, out / "mode_vectors.csv")
    phonons.modes_to_json(modes, out / "modes.json", top_m=int(sec["top_m"]))
    offs = modes.offsets_below_com() / TWO_PI
    print(f"modes: n={modes.n} com={modes.frequencies[0] / TWO_PI / 1e3:.3f}kHz "
          f"span={offs.max() / 1e3:.1f}kHz -> {out / 'modes.csv'}")
    return 0


def _tone_from_config(entry, modes: phonons.ModeSet) -> ising.DriveTone:
    if not isinstance(entry, dict):
        raise ConfigError("each tone must be an object")
    allowed = {"mu_khz", "mode", "detuning_khz", "omega_eff_khz"}
    if set(entry) - allowed:
        raise ConfigError(f"unknown tone keys: {sorted(set(entry) - allowed)}")
    if "omega_eff_khz" not in entry:
        raise ConfigError("tone needs omega_eff_khz")
    om = np.asarray(entry["omega_eff_khz"], dtype=float) * 1e3 * TWO_PI
    if "mu_khz" in entry:
        if "mode" in entry or "detuning_khz" in entry:
            raise ConfigError("give either mu_khz or mode+detuning_khz, not both")
        mu = float(entry["mu_khz"]) * 1e3 * TWO_PI
    else:
        if "mode" not in entry or "detuning_khz" not in entry:
            raise ConfigError("tone needs mu_khz or mode+detuning_khz")
        k = int(entry["mode"])
        if not (1 <= k <= modes.n):
            raise ConfigError(f"tone mode {k} out of range 1..{modes.n}")
        mu = modes.frequencies[k - 1] + float(entry["detuning_khz"]) * 1e3 * TWO_PI
    return ising.DriveTone(mu=mu, omega_eff=om if om.ndim else float(om))


def run_jij(args, cfg) -> int:
    sec = _section(cfg, "jij", {
        "modes": None, "vectors": None, "tones": _REQUIRED,
        "compensate": False, "guard_band_hz": ising.GUARD_BAND / TWO_PI,
    })
    out = _out_dir(args)
    _echo_config(out, "jij", sec, args)
    modes = phonons.modes_from_csv(
        _resolve_path(sec["modes"], out, "modes.csv"),
        _resolve_path(sec["vectors"], out, "mode_vectors.csv"))
    if not isinstance(sec["tones"], list) or not sec["tones"]:
        raise ConfigError("jij.tones must be a non-empty list")
    tones = [_tone_from_config(t, modes) for t in sec["tones"]]
    mode_indices = [args.mode_truncate] if args.mode_truncate else None
    coupling = ising.compute_jij(
        modes, tones, guard_band=float(sec["guard_band_hz"]) * TWO_PI,
        mode_indices=mode_indices, compensate=bool(sec["compensate"]))
    ising.jij_to_csv(coupling, out / "jij.csv", out / "jij.json", tones=tones)
    print(f"jij: n={coupling.n} j0={coupling.j0 / TWO_PI:.4g}Hz "
          f"max|J|={np.abs(coupling.j).max() / TWO_PI:.4g}Hz -> {out / 'jij.csv'}")
    return 0


def run_anneal(args, cfg) -> int:
    sec = _section(cfg, "anneal", {
        "jij": None, "n_sweep": 100, "beta0_inv_khz": 0.01,
        "beta1_inv_khz": 1.0, "m_repeats": 100, "convention": "cycles",
        "beta_scale": 1.0,
    })
    seed = _require_seed(args)
    out = _out_dir(args)
    _echo_config(out, "anneal", sec, args)
    coupling = ising.jij_from_csv(_resolve_path(sec["jij"], out, "jij.csv"))
    try:
        params = annealing.AnnealParams(
            n_sweep=int(sec["n_sweep"]), beta0=float(sec["beta0_inv_khz"]),
            beta1=float(sec["beta1_inv_khz"]), m_repeats=int(sec["m_repeats"]),
            convention=str(sec["convention"]), beta_scale=float(sec["beta_scale"]))
    except ValueError as exc:
        raise ConfigError(str(exc))
    result = annealing.anneal_ensemble(coupling, params, seed,
                                       workers=args.workers)
    result.samples.save_txt(out / "anneal_samples.txt")
    np.savetxt(out / "anneal_covariance.csv", result.covariance,
               delimiter=",", fmt="%.12e")
    summary = {"n": coupling.n, "m_repeats": params.m_repeats,
               "energy_khz_min": float(result.energies.min()),
               "energy_khz_mean": float(result.energies.mean())}
    with open(out / "anneal_summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"anneal: n={coupling.n} M={params.m_repeats} "
          f"E_min={summary['energy_khz_min']:.6g}kHz -> {out / 'anneal_samples.txt'}")
    return 0


def _write_trajectory(path, obs: spindyn.TrajectoryObservables):
    with open(path, "w", newline="") as fh:
        fh.write("t_s,c1,c2,bar_c1,bar_c2\n")
        for i in range(obs.times.size):
            fh.write(",".join(format(v, ".12e") for v in
                              (obs.times[i], obs.c1[i], obs.c2[i],
                               obs.bar_c1[i], obs.bar_c2[i])))
            fh.write("\n")


def run_dynamics(args, cfg) -> int:
    engine = args.engine
    common = {"t_total_ms": _REQUIRED, "n_points": 201, "samples": 0}
    if engine == "dicke":
        sec = _section(cfg, "dynamics", {
            **common, "n": _REQUIRED, "j0_khz": _REQUIRED, "b0_khz": _REQUIRED})
    elif engine == "exact":
        sec = _section(cfg, "dynamics", {
            **common, "jij": None, "b_khz": _REQUIRED, "initial": "zero"})
    else:  # ramp
        sec = _section(cfg, "dynamics", {
            **common, "jij": None, "b0_khz": _REQUIRED, "tau_ms": _REQUIRED,
            "initial": "plus"})
    n_samples = int(sec["samples"])
    if n_samples > 0:
        seed = _require_seed(args)
    out = _out_dir(args)
    _echo_config(out, f"dynamics_{engine}", sec, args)
    t_grid = np.linspace(0.0, float(sec["t_total_ms"]) * 1e-3, int(sec["n_points"]))
    if engine == "dicke":
        traj = spindyn.evolve_dicke(
            float(sec["j0_khz"]) * 1e3 * TWO_PI,
            float(sec["b0_khz"]) * 1e3 * TWO_PI, int(sec["n"]), t_grid)
    else:
        coupling = ising.jij_from_csv(_resolve_path(sec["jij"], out, "jij.csv"))
        initial = (spindyn.zero_state(coupling.n) if sec["initial"] == "zero"
                   else spindyn.plus_state(coupling.n))
        if engine == "exact":
            field = float(sec["b_khz"]) * 1e3 * TWO_PI
        else:
            field = spindyn.RampSchedule(
                b0=float(sec["b0_khz"]) * 1e3 * TWO_PI,
                tau=float(sec["tau_ms"]) * 1e-3, t_total=t_grid[-1])
        traj = spindyn.evolve_exact(coupling, field, t_grid, initial)
    obs = spindyn.trajectory_observables(traj)
    _write_trajectory(out / f"dynamics_{engine}.csv", obs)
    if n_samples > 0:
        samples = spindyn.sample_bitstrings(traj.state(-1), n_samples, seed)
        samples.save_txt(out / f"dynamics_{engine}_samples.txt")
    print(f"dynamics[{engine}]: T={t_grid[-1] * 1e3:g}ms final C2={obs.c2[-1]:.4f} "
          f"-> {out / f'dynamics_{engine}.csv'}")
    return 0


def run_collide(args, cfg) -> int:
    sec = _section(cfg, "collide", {
        "crystal": None, "temperature_k": _REQUIRED, "gas_mass_amu": 2.0,
        "gamma_per_s": 8.0e3, "t_evolve_us": 500.0, "dt_ns": 1.0,
        "n_trials": 100, "thresholds_um": [0.5, 1.0],
    })
    seed = _require_seed(args)
    out = _out_dir(args)
    _echo_config(out, "collide", sec, args)
    cr, trap = crystal.crystal_from_json(
        _resolve_path(sec["crystal"], out, "crystal.json"))
    try:
        gas = stability.GasSpecies(temperature=float(sec["temperature_k"]),
                                   mass=float(sec["gas_mass_amu"]) * AMU)
        config = stability.CollisionConfig(
            gamma=float(sec["gamma_per_s"]), t_evolve=float(sec["t_evolve_us"]) * 1e-6,
            dt=float(sec["dt_ns"]) * 1e-9, n_trials=int(sec["n_trials"]),
            thresholds=tuple(float(t) * 1e-6 for t in sec["thresholds_um"]))
        config.check_step(trap)
    except ValueError as exc:
        raise ConfigError(str(exc))
    result = stability.run_collision_trials(cr, trap, gas, config, seed,
                                            workers=args.workers)
    stability.trials_to_csv(result, out / "collide_trials.csv")
    with open(out / "collide_summary.json", "w") as fh:
        json.dump(result.summary(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    exc_max = result.exceedance(False)
    print(f"collide: trials={result.n_trials} failed={result.n_failed} "
          + " ".join(f">{th * 1e6:g}um:{frac:.2f}" for th, frac in exc_max.items())
          + f" -> {out / 'collide_trials.csv'}")
    return 0


def run_sideband(args, cfg) -> int:
    sec = _section(cfg, "sideband", {
        "scan": _REQUIRED, "mode_centers_khz": _REQUIRED, "points_per_mode": 3,
    })
    out = _out_dir(args)
    _echo_config(out, "sideband", sec, args)
    scan_path = Path(sec["scan"])
    if not scan_path.exists():
        raise ConfigError(f"scan file not found: {scan_path}")
    det, red, blue, nmax = sideband.read_scan_csv(scan_path)
    centers = [float(c) * 1e3 for c in sec["mode_centers_khz"]]
    results = sideband.estimate_scan(det, red, blue, nmax, centers,
                                     points_per_mode=int(sec["points_per_mode"]))
    with open(out / "sideband_nbar.json", "w") as fh:
        json.dump({"modes": results}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print("sideband: " + " ".join(
        f"{r['center_hz'] / 1e3:g}kHz:nbar={r['nbar']:.3f}+-{r['sigma']:.3f}"
        for r in results) + f" -> {out / 'sideband_nbar.json'}")
    return 0


def _partition_to_json(partition: analysis.BubblePartition, m: int, seed, path):
    doc = {
        "n": partition.n, "m": m, "seed": seed,
        "bubbles": [
            {"center": "".join("1" if b else "0" for b in bub.center),
             "radius": int(bub.radius), "ref_count": int(bub.ref_count)}
            for bub in partition.bubbles
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return doc


def _partition_from_json(path) -> analysis.BubblePartition:
    with open(path) as fh:
        doc = json.load(fh)
    bubbles = [
        analysis.Bubble(
            center=np.frombuffer(b["center"].encode(), dtype=np.uint8) - ord("0"),
            radius=int(b["radius"]), ref_count=int(b["ref_count"]))
        for b in doc["bubbles"]
    ]
    return analysis.BubblePartition(bubbles=bubbles, n=int(doc["n"]))


def run_sample_test(args, cfg) -> int:
    action = args.action
    sec = _section(cfg, "sample_test", {
        "reference": None, "samples": None, "partition": None, "m_bubble": 500,
    })
    out = _out_dir(args)
    _echo_config(out, f"sample_test_{action.replace('-', '_')}", sec, args)
    if action == "build-bubbles":
        seed = _require_seed(args)
        if sec["reference"] is None:
            raise ConfigError("sample_test.reference is required for build-bubbles")
        reference = analysis.SampleSet.load_txt(
            _resolve_path(sec["reference"], out, "reference_samples.txt"))
        partition = analysis.build_bubbles(reference, int(sec["m_bubble"]), seed)
        _partition_to_json(partition, int(sec["m_bubble"]), seed, out / "bubbles.json")
        print(f"sample-test[build-bubbles]: {partition.n_bubbles} bubbles "
              f"(catch-all included) -> {out / 'bubbles.json'}")
        return 0
    if sec["samples"] is None:
        raise ConfigError(f"sample_test.samples is required for {action}")
    samples = analysis.SampleSet.load_txt(
        _resolve_path(sec["samples"], out, "samples.txt"))
    partition = _partition_from_json(
        _resolve_path(sec["partition"], out, "bubbles.json"))
    counts = analysis.assign_and_count(partition, samples)
    if action == "assign":
        with open(out / "sample_counts.json", "w") as fh:
            json.dump({"counts": counts.tolist()}, fh, indent=1)
            fh.write("\n")
        print(f"sample-test[assign]: m={samples.m} "
              f"counts={counts.tolist()} -> {out / 'sample_counts.json'}")
        return 0
    probs, merged = analysis.expected_probabilities(partition)
    folded = analysis.merge_counts(counts, merged)
    result = analysis.chi2_test(folded, probs)
    doc = result.to_dict()
    doc.update({"counts": folded.tolist(),
                "expected": (probs * samples.m).tolist(),
                "catchall_merged": merged})
    with open(out / "sample_test.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"sample-test[chi2]: chi2={result.chi2:.3f} dof={result.dof} "
          f"p={result.p_value:.4g} (log10p={result.log10_p:.2f}) "
          f"-> {out / 'sample_test.json'}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ion2d",
        description="Planar ion-crystal simulation pipeline.")
    parser.add_argument("--version", action="version", version=f"ion2d {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (required for randomized stages)")
        p.add_argument("--out", help="output directory (default: current)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads for trial/repeat loops")

    add_common(sub.add_parser("crystal", help="solve an equilibrium crystal"))
    add_common(sub.add_parser("modes", help="transverse mode spectrum"))
    p_jij = sub.add_parser("jij", help="synthesize spin-spin couplings")
    add_common(p_jij)
    p_jij.add_argument("--mode-truncate", type=int, default=None, metavar="K",
                       help="keep only mode K (1-based) in the mode sum")
    add_common(sub.add_parser("anneal", help="simulated annealing ensemble"))
    p_dyn = sub.add_parser("dynamics", help="quantum quench/ramp dynamics")
    p_dyn.add_argument("engine", choices=("exact", "dicke", "ramp"))
    add_common(p_dyn)
    add_common(sub.add_parser("collide", help="background-gas collision trials"))
    add_common(sub.add_parser("sideband", help="sideband-scan thermometry"))
    p_st = sub.add_parser("sample-test", help="bubble chi-square sample testing")
    p_st.add_argument("action", choices=("build-bubbles", "assign", "chi2"))
    add_common(p_st)
    return parser


_RUNNERS = {
    "crystal": run_crystal,
    "modes": run_modes,
    "jij": run_jij,
    "anneal": run_anneal,
    "dynamics": run_dynamics,
    "collide": run_collide,
    "sideband": run_sideband,
    "sample-test": run_sample_test,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = _load_config(args.config)
        return _RUNNERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Ion2dError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
