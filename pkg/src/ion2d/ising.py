"""Effective Ising couplings from spin-dependent forces on transverse modes.

A beat note at mu (rad/s) with per-ion effective Rabi rate Omega_i generates

    J_ij = (Omega_i Omega_j / 16) * sum_k eta_k^2 b_ik b_jk / (mu - omega_k)

summed over every drive tone; positive detuning above a mode gives a
positive (ferromagnetic-pattern) contribution from it.  The drive also
implies a longitudinal field h_i = 2 sum_j J_ij which an experiment can
cancel; both the raw and compensated versions are available.

Truncated to a single mode k the matrix (diagonal restored) is the rank-1
outer product sign(mu - omega_k) * v v^T with
v_i = Omega_i eta_k b_ik / (4 sqrt(|mu - omega_k|)).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ResonanceError
from .phonons import ModeSet

TWO_PI = 2.0 * math.pi

#: Minimum allowed |mu - omega_k|, rad/s.  Closer than this the static
#: spin-spin picture has no meaning and phonons are excited resonantly.
GUARD_BAND = TWO_PI * 50.0


@dataclass(frozen=True)
class DriveTone:
    """One beat-note tone: frequency mu (rad/s) and effective Rabi rate
    omega_eff (rad/s), scalar for uniform illumination or per-ion array."""

    mu: float
    omega_eff: object

    def omega_array(self, n: int) -> np.ndarray:
        om = np.asarray(self.omega_eff, dtype=float)
        if om.ndim == 0:
            return np.full(n, float(om))
        if om.shape != (n,):
            raise ValueError(f"omega_eff must be scalar or shape ({n},), got {om.shape}")
        return om


@dataclass
class IsingCoupling:
    """Synthesized couplings: J (N, N) rad/s with zero diagonal, implied
    longitudinal field h (N,) rad/s, and Kac-normalized average j0."""

    j: np.ndarray
    h: np.ndarray
    j0: float

    @property
    def n(self) -> int:
        return self.j.shape[0]


def kac_j0(j: np.ndarray) -> float:
    """Kac mean coupling (1/N) sum_{i != j} J_ij, rad/s."""
    j = np.asarray(j, dtype=float)
    n = j.shape[0]
    off = j.sum() - np.trace(j)
    return float(off / n)


def longitudinal_field(j: np.ndarray) -> np.ndarray:
    """Field implied by the drive, h_i = 2 sum_j J_ij (diagonal ignored)."""
    j = np.asarray(j, dtype=float)
    return 2.0 * (j.sum(axis=1) - np.diag(j))


def compute_jij(modes: ModeSet, tones, guard_band: float = GUARD_BAND,
                mode_indices=None, compensate: bool = False) -> IsingCoupling:
    """Synthesize the coupling matrix for a set of drive tones.

    Parameters
    ----------
    modes : ModeSet
        Must carry Lamb-Dicke parameters.
    tones : DriveTone or iterable of DriveTone
        Contributions from multiple tones add.
    guard_band : float
        Minimum |mu - omega_k| in rad/s; a tone closer than this to any
        included mode raises ResonanceError naming the mode.
    mode_indices : iterable of int, optional
        1-based mode indices to keep in the sum (1 = COM); None keeps all.
    compensate : bool
        When True the returned h is zero (compensated drive); otherwise
        h_i = 2 sum_j J_ij.

    Returns
    -------
    IsingCoupling
    """
    if modes.lamb_dicke is None:
        raise ValueError("modes carry no Lamb-Dicke parameters; solve with "
                         "species and delta_k or attach them first")
    if isinstance(tones, DriveTone):
        tones = [tones]
    tones = list(tones)
    if not tones:
        raise ValueError("at least one drive tone is required")
    n = modes.n
    if mode_indices is None:
        sel = np.arange(n)
    else:
        sel = np.asarray([int(k) - 1 for k in mode_indices], dtype=int)
        if np.any(sel < 0) or np.any(sel >= n):
            raise ValueError(f"mode indices must be within 1..{n}")
    b = modes.vectors[:, sel]
    omega_k = modes.frequencies[sel]
    eta = modes.lamb_dicke[sel]

    j = np.zeros((n, n))
    for tone in tones:
        detune = tone.mu - omega_k
        close = np.abs(detune) < guard_band
        if np.any(close):
            k_bad = int(sel[np.argmax(close)]) + 1
            raise ResonanceError(
                f"tone at mu = {tone.mu / TWO_PI:.6g} Hz lies within the "
                f"{guard_band / TWO_PI:.3g} Hz guard band of mode {k_bad} "
                f"({omega_k[np.argmax(close)] / TWO_PI:.6g} Hz)")
        om = tone.omega_array(n)
        weights = eta**2 / detune
        j += np.outer(om, om) / 16.0 * ((b * weights) @ b.T)
    np.fill_diagonal(j, 0.0)
    j = 0.5 * (j + j.T)  # remove rounding asymmetry
    h = np.zeros(n) if compensate else longitudinal_field(j)
    return IsingCoupling(j=j, h=h, j0=kac_j0(j))


def single_mode_coupling(modes: ModeSet, mode: int, tone: DriveTone,
                         guard_band: float = GUARD_BAND,
                         compensate: bool = False) -> IsingCoupling:
    """Coupling truncated to one mode (1-based index; 1 = COM)."""
    return compute_jij(modes, tone, guard_band=guard_band,
                       mode_indices=[mode], compensate=compensate)


def single_mode_vector(modes: ModeSet, mode: int, tone: DriveTone) -> np.ndarray:
    """The rank-1 factor v with J + diag = sign(mu - omega_k) v v^T."""
    if modes.lamb_dicke is None:
        raise ValueError("modes carry no Lamb-Dicke parameters")
    k = int(mode) - 1
    om = tone.omega_array(modes.n)
    delta = tone.mu - modes.frequencies[k]
    return om * modes.lamb_dicke[k] * modes.vectors[:, k] / (4.0 * math.sqrt(abs(delta)))


def residual_dephasing(eta: float, omega_eff: float, delta: float, n: int) -> float:
    """Residual spin-motion entanglement factor exp(-2 n eta^2 Omega^2 / delta^2).

    The per-spin factor is the n = 1 value; n spins coupled to the same
    mode multiply to this total.  Valid in the far-detuned dispersive
    regime |delta| >> eta Omega.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if delta == 0:
        raise ValueError("delta must be nonzero")
    x = eta * omega_eff / delta
    return math.exp(-2.0 * n * x * x)


# ---------------------------------------------------------------------------
# serialization: dense CSV of J/2pi in Hz plus a JSON header


def _fmt(x: float) -> str:
    return format(float(x), ".12e")


def jij_to_csv(coupling: IsingCoupling, csv_path, json_path=None, tones=None):
    """Write J as a dense CSV (values J_ij / 2pi in Hz) and a JSON header."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in coupling.j / TWO_PI:
            writer.writerow([_fmt(v) for v in row])
    header = {
        "n": coupling.n,
        "j0_hz": coupling.j0 / TWO_PI,
        "units": "hz",
        "tones": [
            {"mu_hz": t.mu / TWO_PI,
             "omega_eff_hz": (np.asarray(t.omega_eff, dtype=float) / TWO_PI).tolist()}
            for t in (tones or [])
        ],
    }
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(header, fh, indent=1)
            fh.write("\n")
    return header


def jij_from_csv(csv_path) -> IsingCoupling:
    """Read a dense J CSV written by :func:`jij_to_csv` (Hz -> rad/s)."""
    j = np.loadtxt(csv_path, delimiter=",", ndmin=2) * TWO_PI
    if j.shape[0] != j.shape[1]:
        raise ValueError(f"J matrix must be square, got {j.shape}")
    np.fill_diagonal(j, 0.0)
    return IsingCoupling(j=j, h=longitudinal_field(j), j0=kac_j0(j))
