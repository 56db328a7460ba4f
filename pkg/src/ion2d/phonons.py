"""Transverse phonon modes of a planar ion crystal.

For a crystal in the x-z plane the out-of-plane (y) displacements decouple
and their dynamical matrix is

    A_ii = omega_y^2 - sum_{j != i} K / r_ij^3,      K = q^2 / (4 pi eps0 M),
    A_ij = K / r_ij^3                                 (i != j),

with eigenpairs A b_k = omega_k^2 b_k.  Every row of (A - omega_y^2 I) sums
to zero, so the uniform vector is always an exact eigenvector at omega_y:
the center-of-mass mode, which is the highest transverse mode.  Modes are
reported sorted by descending frequency, so array index 0 is the COM mode;
mode numbering at interfaces is 1-based (mode 1 = COM) to match how modes
are counted down from the top of the spectrum.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .crystal import (IonCrystal, TrapParams, max_out_of_plane,
                      nearest_neighbor_spacing, potential_and_gradient,
                      unit_system_for)
from .errors import UnstableCrystalError
from .units import COULOMB_K, HBAR, IonSpecies

TWO_PI = 2.0 * math.pi


@dataclass
class ModeSet:
    """Transverse mode solution.

    Attributes
    ----------
    frequencies : (N,) array
        Mode angular frequencies in rad/s, sorted descending (index 0 = COM).
    vectors : (N, N) array
        Orthonormal mode vectors; column k is b_ik for mode index k.
        Sign fixed so sum_i b_ik > 0, falling back to making the
        largest-magnitude component positive for balanced modes.
    lamb_dicke : (N,) array or None
        Per-mode Lamb-Dicke parameters eta_k for the stored delta_k.
    delta_k : float or None
        Wave-vector difference (1/m) used for the Lamb-Dicke parameters.
    """

    frequencies: np.ndarray
    vectors: np.ndarray
    lamb_dicke: np.ndarray | None = None
    delta_k: float | None = None

    @property
    def n(self) -> int:
        return self.frequencies.shape[0]

    def offsets_below_com(self) -> np.ndarray:
        """omega_COM - omega_k for every mode, rad/s (non-negative)."""
        return self.frequencies[0] - self.frequencies


def counterprop_delta_k(wavelength: float) -> float:
    """Wave-vector difference for counter-propagating beams, 1/m."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return 2.0 * TWO_PI / wavelength


def lamb_dicke(delta_k: float, species: IonSpecies, omega_k) -> float | np.ndarray:
    """Lamb-Dicke parameter eta = delta_k * sqrt(hbar / (2 M omega_k))."""
    omega_k = np.asarray(omega_k, dtype=float)
    if np.any(omega_k <= 0):
        raise ValueError("mode frequency must be positive")
    eta = delta_k * np.sqrt(HBAR / (2.0 * species.mass * omega_k))
    return float(eta) if eta.ndim == 0 else eta


def transverse_hessian(crystal: IonCrystal, trap: TrapParams,
                       planarity_tol: float = 1e-3,
                       residual_tol: float = 1e-8) -> np.ndarray:
    """Out-of-plane dynamical matrix A of a planar equilibrium, (rad/s)^2.

    Raises ValueError if the crystal is not planar (max |y| above
    ``planarity_tol`` times the mean nearest-neighbor spacing) or not at
    equilibrium (dimensionless force residual above ``residual_tol``).
    """
    n = crystal.n
    if n > 1:
        spacing = nearest_neighbor_spacing(crystal)
        y_max = max_out_of_plane(crystal)
        if y_max > planarity_tol * spacing:
            raise ValueError(
                f"crystal is not planar: max |y| = {y_max:.3e} m exceeds "
                f"{planarity_tol:g} of the mean spacing {spacing:.3e} m")
        us = unit_system_for(trap, crystal.species)
        _, g = potential_and_gradient(us.from_si_length(crystal.positions),
                                      trap, crystal.species, dimensionless=True)
        res = float(np.abs(g).max())
        if res > residual_tol:
            raise ValueError(
                f"crystal is not at equilibrium: dimensionless force residual "
                f"{res:.3e} exceeds {residual_tol:g}")

    k_coul = COULOMB_K * crystal.species.charge**2 / crystal.species.mass
    pos = crystal.positions
    d = pos[:, None, :] - pos[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, np.inf)
    inv_r3 = 1.0 / (r2 * np.sqrt(r2))
    a = k_coul * inv_r3
    np.fill_diagonal(a, trap.omega_y**2 - k_coul * inv_r3.sum(axis=1))
    return a


def solve_modes(hessian: np.ndarray, species: IonSpecies | None = None,
                delta_k: float | None = None) -> ModeSet:
    """Diagonalize a transverse dynamical matrix into a ModeSet.

    Frequencies are sorted descending; mode vectors get the sign convention
    described on :class:`ModeSet`.  When ``species`` and ``delta_k`` are
    given, per-mode Lamb-Dicke parameters are attached.

    Raises UnstableCrystalError when any eigenvalue is non-positive, naming
    the offending (1-based, descending-order) mode index.
    """
    a = np.asarray(hessian, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"hessian must be square, got {a.shape}")
    evals, evecs = scipy.linalg.eigh(a)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    if evals[-1] <= 0.0:
        bad = int(np.argmax(evals <= 0.0))
        raise UnstableCrystalError(
            f"mode {bad + 1} has non-positive eigenvalue {evals[bad]:.6e}; "
            "the configuration is not a stable planar minimum")
    for k in range(evecs.shape[1]):
        s = evecs[:, k].sum()
        if abs(s) > 1e-8:
            if s < 0:
                evecs[:, k] *= -1.0
        elif evecs[np.argmax(np.abs(evecs[:, k])), k] < 0:
            evecs[:, k] *= -1.0
    freqs = np.sqrt(evals)
    eta = None
    if species is not None and delta_k is not None:
        eta = lamb_dicke(delta_k, species, freqs)
    return ModeSet(frequencies=freqs, vectors=np.ascontiguousarray(evecs),
                   lamb_dicke=eta, delta_k=delta_k)


def transverse_modes(crystal: IonCrystal, trap: TrapParams,
                     delta_k: float | None = None) -> ModeSet:
    """Convenience wrapper: hessian + diagonalization in one call."""
    return solve_modes(transverse_hessian(crystal, trap), crystal.species, delta_k)


# ---------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    return format(float(x), ".12e")


def modes_to_csv(modes: ModeSet, path):
    """Per-mode table: 1-based index, frequency, offset below COM, eta."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "freq_hz", "offset_below_com_hz", "lamb_dicke"])
        offs = modes.offsets_below_com()
        for k in range(modes.n):
            eta = modes.lamb_dicke[k] if modes.lamb_dicke is not None else float("nan")
            writer.writerow([k + 1, _fmt(modes.frequencies[k] / TWO_PI),
                             _fmt(offs[k] / TWO_PI), _fmt(eta)])


def mode_vectors_to_csv(modes: ModeSet, path):
    """Dense N x N matrix of b_ik (rows = ions, columns = modes)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in modes.vectors:
            writer.writerow([_fmt(v) for v in row])


def modes_to_json(modes: ModeSet, path=None, top_m: int | None = None):
    """JSON summary of the top-m modes (all when top_m is None)."""
    m = modes.n if top_m is None else min(top_m, modes.n)
    offs = modes.offsets_below_com()
    doc = {
        "n": modes.n,
        "delta_k_per_m": modes.delta_k,
        "com_freq_hz": modes.frequencies[0] / TWO_PI,
        "modes": [
            {
                "mode": k + 1,
                "freq_hz": modes.frequencies[k] / TWO_PI,
                "offset_below_com_hz": offs[k] / TWO_PI,
                "lamb_dicke": (modes.lamb_dicke[k] if modes.lamb_dicke is not None else None),
            }
            for k in range(m)
        ],
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return doc


def modes_from_csv(freq_path, vectors_path, delta_k: float | None = None) -> ModeSet:
    """Rebuild a ModeSet from the two CSV files."""
    freqs, etas = [], []
    with open(freq_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["mode", "freq_hz"]:
            raise ValueError(f"unexpected mode CSV header: {header}")
        for rec in reader:
            freqs.append(TWO_PI * float(rec[1]))
            etas.append(float(rec[3]))
    vectors = np.loadtxt(vectors_path, delimiter=",", ndmin=2)
    freqs = np.asarray(freqs)
    etas = np.asarray(etas)
    if vectors.shape != (len(freqs), len(freqs)):
        raise ValueError(
            f"vector matrix shape {vectors.shape} does not match {len(freqs)} modes")
    eta_arr = None if np.all(np.isnan(etas)) else etas
    return ModeSet(frequencies=freqs, vectors=vectors, lamb_dicke=eta_arr,
                   delta_k=delta_k)
