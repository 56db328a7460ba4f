"""Equilibrium geometry of ion Coulomb crystals in a 3D harmonic trap.

The trap is characterized by angular frequencies (omega_x, omega_y, omega_z)
with the crystal plane spanned by x and z when omega_y dominates; y is the
transverse direction.  The reference frequency for the dimensionless unit
system is omega_z (see :mod:`ion2d.units`).

Equilibria are found in three stages: a triangular-lattice initial guess
shaped to the trap anisotropy, damped dynamics to reach the basin, and a
Newton polish on the full 3N-dimensional potential down to a max-norm force
residual of 1e-10 in dimensionless units.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import CapacityError, ConvergenceError
from .units import IonSpecies, UnitSystem

TWO_PI = 2.0 * math.pi

#: Hard cap on crystal size; the dense Hessian above this gets unwieldy.
MAX_IONS = 4096


@dataclass(frozen=True)
class TrapParams:
    """Harmonic trap angular frequencies in rad/s."""

    omega_x: float
    omega_y: float
    omega_z: float

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "omega_z"):
            v = getattr(self, name)
            if not (v > 0) or not math.isfinite(v):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def from_frequencies_hz(cls, fx: float, fy: float, fz: float) -> "TrapParams":
        """Build from ordinary frequencies in Hz."""
        return cls(TWO_PI * fx, TWO_PI * fy, TWO_PI * fz)

    @property
    def is_planar_regime(self) -> bool:
        """True when y is the stiff direction, so the crystal is planar in x-z."""
        return self.omega_y > max(self.omega_x, self.omega_z)

    def omegas(self) -> np.ndarray:
        return np.array([self.omega_x, self.omega_y, self.omega_z])


@dataclass
class IonCrystal:
    """A crystal configuration: positions in meters, per-row ion labels.

    ``labels[i]`` identifies the ion occupying row ``i``; a freshly solved
    or constructed crystal uses 0..N-1, and :func:`sort_by_z` permutes rows
    while carrying labels along, so the label traces each ion through
    reorderings.
    """

    positions: np.ndarray
    species: IonSpecies
    labels: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError(f"positions must be (N, 3), got {self.positions.shape}")
        n = self.positions.shape[0]
        if self.labels is None:
            self.labels = np.arange(n)
        else:
            self.labels = np.asarray(self.labels, dtype=int)
            if sorted(self.labels.tolist()) != list(range(n)):
                raise ValueError("labels must be a permutation of 0..N-1")

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def unit_system_for(trap: TrapParams, species: IonSpecies) -> UnitSystem:
    """Unit system with omega_z as the reference frequency."""
    return UnitSystem.for_trap(species, trap.omega_z)


def _potential_gradient_dimensionless(pos: np.ndarray, wsq: np.ndarray):
    """Energy and gradient of the trap+Coulomb potential, dimensionless."""
    pos = np.asarray(pos, dtype=float)
    d = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, np.inf)
    if np.any(r2 <= 0.0):
        raise ValueError("coincident ions: pair distance is zero")
    r = np.sqrt(r2)
    inv_r = 1.0 / r
    u = 0.5 * np.sum(wsq * pos**2) + 0.5 * np.sum(inv_r)
    inv_r3 = inv_r / r2
    grad = wsq * pos - np.einsum("ij,ijk->ik", inv_r3, d)
    return u, grad


def _hessian_dimensionless(pos: np.ndarray, wsq: np.ndarray) -> np.ndarray:
    """Full (3N, 3N) Hessian of the dimensionless potential."""
    n = pos.shape[0]
    d = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, np.inf)
    r = np.sqrt(r2)
    inv_r3 = 1.0 / (r2 * r)
    inv_r5 = inv_r3 / r2
    blocks = np.eye(3)[None, None, :, :] * inv_r3[:, :, None, None]
    blocks -= 3.0 * d[:, :, :, None] * d[:, :, None, :] * inv_r5[:, :, None, None]
    diag = np.diag(wsq)[None, :, :] - blocks.sum(axis=1)
    idx = np.arange(n)
    blocks[idx, idx] = diag
    return blocks.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)


def potential_and_gradient(positions, trap: TrapParams, species: IonSpecies,
                           dimensionless: bool = False):
    """Potential energy and gradient of a configuration.

    Parameters
    ----------
    positions : (N, 3) array
        Ion positions in meters, or in units of l0 if ``dimensionless``.
    trap, species : trap and ion parameters.
    dimensionless : bool
        When True, input and output are in the crystal unit system
        (energy in M l0^2 omega_z^2, gradient in that energy per l0).

    Returns
    -------
    (float, (N, 3) array)
        Energy and gradient dU/dr.  SI output is Joules and Newtons.
    """
    us = unit_system_for(trap, species)
    wsq = (trap.omegas() / trap.omega_z) ** 2
    pos = np.asarray(positions, dtype=float)
    if not dimensionless:
        pos = us.from_si_length(pos)
    u, g = _potential_gradient_dimensionless(pos, wsq)
    if dimensionless:
        return u, g
    return u * us.energy, g * (us.energy / us.length)


def lattice_guess(trap: TrapParams, species: IonSpecies, n: int, seed: int) -> np.ndarray:
    """Triangular-lattice starting configuration, in meters.

    A hexagonal patch in the x-z plane, clipped to the equilibrium ellipse
    estimated from force balance (R_z ~ N^(1/3) l0 for omega_ref = omega_z,
    R_x shrunk by the trap anisotropy), plus seeded in-plane jitter of
    0.01 l0.  Keeping y = 0 exactly biases the search toward planar minima.
    """
    us = unit_system_for(trap, species)
    w = trap.omegas() / trap.omega_z
    rng = np.random.default_rng(seed)
    r_z = max(n, 2) ** (1.0 / 3.0)
    r_x = r_z * (w[2] / w[0]) ** (2.0 / 3.0)
    a = math.sqrt(math.pi * r_x * r_z / (0.5 * math.sqrt(3.0) * n))
    reach = int(math.ceil(2.5 * max(r_x, r_z) / a)) + 2
    ii, jj = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1))
    xs = a * (ii.ravel() + 0.5 * jj.ravel())
    zs = a * (0.5 * math.sqrt(3.0) * jj.ravel())
    score = (xs / r_x) ** 2 + (zs / r_z) ** 2
    pick = np.argsort(score, kind="stable")[:n]
    pos = np.zeros((n, 3))
    pos[:, 0] = xs[pick] + 0.01 * rng.standard_normal(n)
    pos[:, 2] = zs[pick] + 0.01 * rng.standard_normal(n)
    if not trap.is_planar_regime:
        pos[:, 1] = 0.01 * rng.standard_normal(n)
    return us.to_si_length(pos)


def _newton_polish(pos, wsq, tol, max_iter=60):
    """Damped Newton iteration on the dimensionless potential.

    Returns (positions, residual); raises ConvergenceError if the max-norm
    gradient never reaches ``tol``.
    """
    pos = pos.copy()
    lam = 0.0
    _, g = _potential_gradient_dimensionless(pos, wsq)
    res = np.abs(g).max()
    for _ in range(max_iter):
        if res < tol:
            return pos, res
        h = _hessian_dimensionless(pos, wsq)
        if lam > 0.0:
            h = h + lam * np.eye(h.shape[0])
        try:
            step = np.linalg.solve(h, g.ravel()).reshape(pos.shape)
        except np.linalg.LinAlgError:
            lam = max(10.0 * lam, 1e-6)
            continue
        trial = pos - step
        try:
            _, g_new = _potential_gradient_dimensionless(trial, wsq)
            res_new = np.abs(g_new).max()
        except ValueError:
            res_new = np.inf
        if res_new < res:
            pos, g, res = trial, g_new, res_new
            lam *= 0.1
        else:
            lam = max(10.0 * lam, 1e-6)
            if lam > 1e12:
                break
    if res < tol:
        return pos, res
    raise ConvergenceError(
        f"equilibrium polish stalled at residual {res:.3e} (tol {tol:.1e})",
        residual=res,
    )


def solve_equilibrium(trap: TrapParams, species: IonSpecies, n: int,
                      init=None, seed: int | None = None,
                      tol_force: float = 1e-10) -> IonCrystal:
    """Solve for the equilibrium crystal configuration.

    Parameters
    ----------
    trap : TrapParams
    species : IonSpecies
    n : int
        Ion count (1 <= n <= MAX_IONS).
    init : (n, 3) array, optional
        Starting positions in meters.  When omitted, a seeded triangular
        lattice guess is used and ``seed`` is required.
    seed : int, optional
        Seed for the initial-guess jitter.  Required when ``init`` is None.
    tol_force : float
        Convergence tolerance on the dimensionless max-norm gradient.

    Returns
    -------
    IonCrystal
        Rows sorted in ascending z (ties by x); positions in meters.

    Raises
    ------
    ConvergenceError
        If the residual cannot be brought below ``tol_force``.
    CapacityError
        If ``n`` exceeds MAX_IONS.
    """
    if n < 1:
        raise ValueError(f"need at least one ion, got n={n}")
    if n > MAX_IONS:
        raise CapacityError(f"n={n} exceeds the supported maximum of {MAX_IONS}")
    us = unit_system_for(trap, species)
    wsq = (trap.omegas() / trap.omega_z) ** 2

    if n == 1:
        return IonCrystal(np.zeros((1, 3)), species)

    if init is not None:
        pos = us.from_si_length(np.asarray(init, dtype=float))
        if pos.shape != (n, 3):
            raise ValueError(f"init must have shape ({n}, 3), got {pos.shape}")
    else:
        if seed is None:
            raise ValueError("seed is required when no initial configuration is given")
        pos = us.from_si_length(lattice_guess(trap, species, n, seed))

    # Damped dynamics to settle into the basin before Newton.
    dt = 0.02 * TWO_PI / math.sqrt(wsq.max())
    gamma = 1.0
    vel = np.zeros_like(pos)
    chunk = 250
    _, g = _potential_gradient_dimensionless(pos, wsq)
    res = np.abs(g).max()
    for _ in range(400):
        if res < 1e-5:
            break
        status = _kernels.damped_verlet(pos, vel, wsq, gamma, dt, chunk, 1e-4)
        if status != 0:
            raise ConvergenceError("ions collapsed during damped descent", residual=res)
        _, g = _potential_gradient_dimensionless(pos, wsq)
        res = np.abs(g).max()

    pos, _ = _newton_polish(pos, wsq, tol_force)
    crystal = IonCrystal(us.to_si_length(pos), species)
    return sort_by_z(crystal)


def sort_by_z(crystal: IonCrystal) -> IonCrystal:
    """Reorder rows in ascending z, ties broken by ascending x."""
    order = np.lexsort((crystal.positions[:, 0], crystal.positions[:, 2]))
    return IonCrystal(crystal.positions[order].copy(), crystal.species,
                      crystal.labels[order].copy())


def nearest_neighbor_spacing(crystal: IonCrystal) -> float:
    """Mean over ions of the distance to their nearest neighbor, meters."""
    pos = crystal.positions
    d = pos[:, None, :] - pos[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    np.fill_diagonal(r, np.inf)
    return float(r.min(axis=1).mean())


def max_out_of_plane(crystal: IonCrystal) -> float:
    """Largest |y| coordinate, meters."""
    return float(np.abs(crystal.positions[:, 1]).max())


# ---------------------------------------------------------------------------
# serialization: positions in micrometers, frequencies in ordinary Hz


def _fmt(x: float) -> str:
    return format(float(x), ".12e")


def crystal_to_json(crystal: IonCrystal, trap: TrapParams, path=None):
    """Serialize to the crystal JSON layout; returns the dict, writes if
    ``path`` is given."""
    doc = {
        "n": crystal.n,
        "trap_hz": [trap.omega_x / TWO_PI, trap.omega_y / TWO_PI, trap.omega_z / TWO_PI],
        "species": {"mass_kg": crystal.species.mass, "charge_c": crystal.species.charge},
        "positions_um": (crystal.positions * 1e6).tolist(),
        "labels": crystal.labels.tolist(),
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return doc


def crystal_from_json(source) -> tuple[IonCrystal, TrapParams]:
    """Inverse of :func:`crystal_to_json`; ``source`` is a path or dict."""
    if isinstance(source, dict):
        doc = source
    else:
        with open(source) as fh:
            doc = json.load(fh)
    trap = TrapParams.from_frequencies_hz(*doc["trap_hz"])
    species = IonSpecies(mass=doc["species"]["mass_kg"], charge=doc["species"]["charge_c"])
    pos = np.asarray(doc["positions_um"], dtype=float) * 1e-6
    labels = np.asarray(doc.get("labels", np.arange(len(pos))), dtype=int)
    crystal = IonCrystal(pos, species, labels)
    if crystal.n != doc["n"]:
        raise ValueError(f"header says n={doc['n']} but {crystal.n} positions given")
    return crystal, trap


def crystal_to_csv(crystal: IonCrystal, path):
    """Write rows of (label, x_um, y_um, z_um)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "x_um", "y_um", "z_um"])
        for lab, row in zip(crystal.labels, crystal.positions * 1e6):
            writer.writerow([int(lab), _fmt(row[0]), _fmt(row[1]), _fmt(row[2])])


def crystal_from_csv(path, species: IonSpecies) -> IonCrystal:
    """Read back a crystal written by :func:`crystal_to_csv`."""
    labels, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["label", "x_um", "y_um", "z_um"]:
            raise ValueError(f"unexpected crystal CSV header: {header}")
        for rec in reader:
            labels.append(int(rec[0]))
            rows.append([float(rec[1]), float(rec[2]), float(rec[3])])
    return IonCrystal(np.asarray(rows) * 1e-6, species, np.asarray(labels))
