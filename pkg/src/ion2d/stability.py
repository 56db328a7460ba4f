"""Crystal response to background-gas collisions under laser cooling.

One trial: draw a gas-molecule velocity from the Maxwell-Boltzmann
distribution at the gas temperature, transfer the head-on elastic-collision
velocity v_ion = 2 v_gas / (1 + M/m) to one uniformly random ion, and relax
the crystal with damped molecular dynamics (M r'' = -grad U - M gamma r')
for t_evolve.  The final configuration is compared against the unperturbed
reference both site-by-site (max deviation) and after an optimal
assignment of final ions to reference sites (matched deviation), which
discounts pure relabelings when ions swap places.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .crystal import IonCrystal, TrapParams, unit_system_for
from .errors import NearCollisionError
from .units import AMU, K_B

TWO_PI = 2.0 * math.pi

#: Pair distances below this fraction of l0 abort the integration.
ABORT_DISTANCE_FRACTION = 0.01


@dataclass(frozen=True)
class GasSpecies:
    """Background gas: temperature in K, molecular mass in kg (default H2)."""

    temperature: float
    mass: float = 2.0 * AMU

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")
        if self.mass <= 0:
            raise ValueError(f"gas mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class CollisionConfig:
    """Trial parameters: cooling rate gamma (1/s), relaxation time t_evolve
    (s), integrator step dt (s), trial count, deviation thresholds (m)."""

    gamma: float = 8.0e3
    t_evolve: float = 500.0e-6
    dt: float = 1.0e-9
    n_trials: int = 100
    thresholds: tuple = (0.5e-6, 1.0e-6)

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.t_evolve <= 0 or self.dt <= 0:
            raise ValueError("t_evolve and dt must be positive")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if any(th <= 0 for th in self.thresholds):
            raise ValueError("thresholds must be positive")

    def check_step(self, trap: TrapParams):
        """Resolve the fastest motion: require dt <= 0.02 * (2 pi / omega_y)."""
        dt_max = 0.02 * TWO_PI / trap.omega_y
        if self.dt > dt_max:
            raise ValueError(
                f"dt = {self.dt:.3e} s exceeds 0.02 of the transverse period "
                f"({dt_max:.3e} s)")


def sample_gas_velocity(gas: GasSpecies, rng) -> np.ndarray:
    """One Maxwell-Boltzmann velocity vector (m/s): each Cartesian component
    is Gaussian with variance k_B T / m."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    sigma = math.sqrt(K_B * gas.temperature / gas.mass)
    return rng.normal(0.0, sigma, size=3)


def collision_kick(v_gas, ion_mass: float, gas_mass: float) -> np.ndarray:
    """Ion velocity after a head-on elastic collision with a gas molecule:
    v_ion = 2 v_gas / (1 + M/m)."""
    v_gas = np.asarray(v_gas, dtype=float)
    return 2.0 * v_gas / (1.0 + ion_mass / gas_mass)


def damped_md(crystal: IonCrystal, velocities, trap: TrapParams, gamma: float,
              t_evolve: float, dt: float):
    """Relax a kicked crystal with damped velocity-Verlet dynamics.

    Parameters are SI throughout (velocities in m/s).  The number of steps
    is round(t_evolve / dt), so the realized time is an integer multiple of
    dt.  Raises NearCollisionError when any pair distance falls below 1% of
    the length unit l0 (the integrator cannot resolve such an encounter).

    Returns (final_crystal, final_velocities).
    """
    CollisionConfig(gamma=max(gamma, 0.0), t_evolve=t_evolve, dt=dt).check_step(trap)
    us = unit_system_for(trap, crystal.species)
    pos = us.from_si_length(crystal.positions).copy()
    vel = us.from_si_velocity(np.asarray(velocities, dtype=float)).copy()
    if vel.shape != pos.shape:
        raise ValueError(f"velocities must have shape {pos.shape}, got {vel.shape}")
    wsq = (trap.omegas() / trap.omega_z) ** 2
    n_steps = max(int(round(t_evolve / dt)), 1)
    status = _kernels.damped_verlet(pos, vel, wsq, gamma * us.time,
                                    dt / us.time, n_steps,
                                    ABORT_DISTANCE_FRACTION)
    if status != 0:
        raise NearCollisionError(
            f"pair distance fell below {ABORT_DISTANCE_FRACTION:g} l0 "
            f"({ABORT_DISTANCE_FRACTION * us.length:.2e} m) during relaxation")
    final = IonCrystal(us.to_si_length(pos), crystal.species, crystal.labels.copy())
    return final, us.to_si_velocity(vel)


def max_deviation(final, reference) -> float:
    """Largest per-site displacement max_i |r_i - r_i^ref|, in meters."""
    f = final.positions if isinstance(final, IonCrystal) else np.asarray(final)
    r = reference.positions if isinstance(reference, IonCrystal) else np.asarray(reference)
    if f.shape != r.shape:
        raise ValueError("configurations must have the same shape")
    return float(np.linalg.norm(f - r, axis=1).max())


def matched_deviation(final, reference):
    """Deviation after optimally re-assigning ions to reference sites.

    Minimizes the total squared distance over permutations (Hungarian
    algorithm) and reports the largest matched distance, so a pure site
    swap costs nothing.  The sum-optimal assignment can occasionally have
    a larger maximal distance than no re-assignment at all; in that case
    the identity mapping is kept, so the result never exceeds
    max_deviation.  Returns (permutation, deviation): permutation[i] is
    the final-ion index assigned to reference site i.
    """
    f = final.positions if isinstance(final, IonCrystal) else np.asarray(final)
    r = reference.positions if isinstance(reference, IonCrystal) else np.asarray(reference)
    if f.shape != r.shape:
        raise ValueError("configurations must have the same shape")
    diff = r[:, None, :] - f[None, :, :]
    cost = np.einsum("ijk,ijk->ij", diff, diff)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    dev = float(np.sqrt(cost[rows, cols].max()))
    raw = float(np.sqrt(np.diagonal(cost).max()))
    if dev > raw:
        return np.arange(len(rows)), raw
    return perm, dev


@dataclass
class CollisionTrialResult:
    """Per-trial records plus threshold-exceedance fractions.

    Arrays are indexed by trial; failed trials (near-collision aborts) have
    NaN deviations and are excluded from the exceedance denominators.
    """

    kicked_ion: np.ndarray
    gas_speed: np.ndarray
    max_dev: np.ndarray
    matched_dev: np.ndarray
    failed: np.ndarray
    thresholds: tuple

    @property
    def n_trials(self) -> int:
        return self.kicked_ion.size

    @property
    def n_failed(self) -> int:
        return int(self.failed.sum())

    def exceedance(self, matched: bool = False) -> dict:
        """Fraction of (successful) trials whose deviation exceeds each
        threshold."""
        dev = self.matched_dev if matched else self.max_dev
        ok = ~self.failed
        denom = max(int(ok.sum()), 1)
        return {th: float((dev[ok] > th).sum()) / denom for th in self.thresholds}

    def summary(self) -> dict:
        return {
            "n_trials": int(self.n_trials),
            "n_failed": self.n_failed,
            "thresholds_um": [th * 1e6 for th in self.thresholds],
            "exceedance_max": {f"{th * 1e6:g}um": v
                               for th, v in self.exceedance(False).items()},
            "exceedance_matched": {f"{th * 1e6:g}um": v
                                   for th, v in self.exceedance(True).items()},
        }


def run_collision_trials(crystal: IonCrystal, trap: TrapParams, gas: GasSpecies,
                         config: CollisionConfig, seed: int,
                         workers: int = 1) -> CollisionTrialResult:
    """Run independent collision trials against one reference crystal.

    Trial t draws its kicked ion and gas velocity from a stream seeded by
    (seed, t), so results are reproducible and independent of ``workers``.
    A trial whose relaxation aborts on a near-collision is recorded as
    failed rather than raising.
    """
    config.check_step(trap)
    n = crystal.n
    n_t = config.n_trials
    kicked = np.empty(n_t, dtype=int)
    speed = np.empty(n_t)
    max_dev = np.full(n_t, np.nan)
    matched_dev = np.full(n_t, np.nan)
    failed = np.zeros(n_t, dtype=bool)

    def run(t: int):
        rng = np.random.default_rng([seed, t])
        ion = int(rng.integers(n))
        v_gas = sample_gas_velocity(gas, rng)
        kicked[t] = ion
        speed[t] = float(np.linalg.norm(v_gas))
        vel = np.zeros((n, 3))
        vel[ion] = collision_kick(v_gas, crystal.species.mass, gas.mass)
        try:
            final, _ = damped_md(crystal, vel, trap, config.gamma,
                                 config.t_evolve, config.dt)
        except NearCollisionError:
            failed[t] = True
            return
        max_dev[t] = max_deviation(final, crystal)
        matched_dev[t] = matched_deviation(final, crystal)[1]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(n_t)))
    else:
        for t in range(n_t):
            run(t)
    return CollisionTrialResult(kicked_ion=kicked, gas_speed=speed,
                                max_dev=max_dev, matched_dev=matched_dev,
                                failed=failed, thresholds=config.thresholds)


def trials_to_csv(result: CollisionTrialResult, path):
    """Per-trial table in micrometers."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "kicked_ion", "gas_speed_m_s",
                         "max_dev_um", "matched_dev_um", "failed"])
        for t in range(result.n_trials):
            writer.writerow([
                t, int(result.kicked_ion[t]),
                format(result.gas_speed[t], ".9e"),
                format(result.max_dev[t] * 1e6, ".9e"),
                format(result.matched_dev[t] * 1e6, ".9e"),
                int(result.failed[t]),
            ])
