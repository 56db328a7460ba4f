"""Simulated annealing on synthesized Ising couplings.

The classical energy is E(s) = -sum_{i != j} J_ij s_i s_j with s_i = +-1
and no longitudinal field.  One run starts from a uniformly random
configuration and performs n_sweep sweeps of N single-flip Metropolis
attempts each (uniformly random site per attempt, acceptance
min(1, exp(-beta dE))), with beta ramped linearly from beta0 to beta1
across sweeps.  An ensemble of M independent runs yields sample
configurations and the Z2-symmetric covariance C_ij = (1/M) sum_m s_i s_j.

beta is quoted in 1/kHz.  What "J in kHz" means is a convention:
``convention="cycles"`` (the default) measures the energy in ordinary-
frequency kHz, i.e. the exponent is beta * E/(2 pi * 1000) for E in rad/s,
while ``convention="angular"`` uses beta * E/1000.  An extra
``beta_scale`` knob multiplies beta to absorb any overall rescaling of J.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .analysis import SampleSet, covariance
from .ising import IsingCoupling

TWO_PI = 2.0 * math.pi

_CONVENTIONS = ("cycles", "angular")


@dataclass(frozen=True)
class AnnealParams:
    """Annealing schedule parameters.

    n_sweep sweeps of N flip attempts each; beta ramps linearly from beta0
    to beta1 (in 1/kHz) across sweeps; m_repeats independent runs.
    """

    n_sweep: int = 100
    beta0: float = 0.01
    beta1: float = 1.0
    m_repeats: int = 100
    convention: str = "cycles"
    beta_scale: float = 1.0

    def __post_init__(self):
        if self.n_sweep < 1:
            raise ValueError(f"n_sweep must be >= 1, got {self.n_sweep}")
        if self.m_repeats < 1:
            raise ValueError(f"m_repeats must be >= 1, got {self.m_repeats}")
        if self.beta0 < 0 or self.beta1 < 0:
            raise ValueError("beta must be non-negative")
        if self.convention not in _CONVENTIONS:
            raise ValueError(f"convention must be one of {_CONVENTIONS}")
        if self.beta_scale <= 0:
            raise ValueError("beta_scale must be positive")

    def betas(self) -> np.ndarray:
        """Per-sweep inverse temperatures (1/kHz), including beta_scale."""
        if self.n_sweep == 1:
            return np.array([self.beta1 * self.beta_scale])
        ramp = np.linspace(self.beta0, self.beta1, self.n_sweep)
        return ramp * self.beta_scale


def _j_in_khz(coupling, convention: str) -> np.ndarray:
    """Coupling matrix in the kHz energy units matching beta.

    IsingCoupling carries rad/s and is converted per the convention; a
    plain array is taken to be in the right units already.
    """
    if isinstance(coupling, IsingCoupling):
        scale = 1.0 / (TWO_PI * 1000.0) if convention == "cycles" else 1.0 / 1000.0
        j = coupling.j * scale
    else:
        j = np.array(coupling, dtype=float)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise ValueError(f"J must be a square matrix, got {j.shape}")
    j = 0.5 * (j + j.T)
    np.fill_diagonal(j, 0.0)
    return np.ascontiguousarray(j)


def ising_energy(j, spins) -> float:
    """E(s) = -sum_{i != j} J_ij s_i s_j (diagonal ignored), in J's units."""
    j = np.asarray(j, dtype=float)
    s = np.asarray(spins, dtype=float)
    return float(-(s @ j @ s) + (np.diag(j) * s * s).sum())


def metropolis_accept(delta_e: float, beta: float, u: float) -> bool:
    """The acceptance rule: always for dE <= 0, else u < exp(-beta dE)."""
    return delta_e <= 0.0 or u < math.exp(-beta * delta_e)


def anneal_once(coupling, params: AnnealParams, seed) -> tuple[np.ndarray, float]:
    """One annealing run.

    Parameters
    ----------
    coupling : IsingCoupling or (N, N) array
        An IsingCoupling (rad/s) is converted per ``params.convention``;
        a plain array is taken to be in kHz energy units already.
    params : AnnealParams
    seed : int or sequence
        Seeds the run's own random stream (initial spins, flip sites,
        acceptance uniforms).

    Returns
    -------
    (spins, energy) : ((N,) int8 array of +-1, float)
        Energy is E(s) = -sum_{i != j} J_ij s_i s_j in the kHz units the
        run used.
    """
    j_khz = _j_in_khz(coupling, params.convention)
    n = j_khz.shape[0]
    rng = np.random.default_rng(seed)
    spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
    betas = params.betas()
    n_att = params.n_sweep * n
    sites = rng.integers(0, n, size=n_att)
    urand = rng.random(n_att)
    energy = _kernels.metropolis_anneal(j_khz, spins, betas, sites, urand)
    return spins, float(energy)


@dataclass
class AnnealResult:
    """Ensemble output: per-run spins (M, N), energies (M,), the sample set
    (spins as bits, +1 -> 0), and the Z2 covariance."""

    spins: np.ndarray
    energies: np.ndarray
    samples: SampleSet
    covariance: np.ndarray
    params: AnnealParams = field(repr=False, default=None)  # type: ignore[assignment]


def anneal_ensemble(coupling, params: AnnealParams, seed: int,
                    workers: int = 1) -> AnnealResult:
    """Run M independent annealing repeats.

    Repeat r uses the random stream seeded by (seed, r), so results are
    identical for any ``workers`` count and any scheduling order.
    """
    j_khz = _j_in_khz(coupling, params.convention)
    n = j_khz.shape[0]
    m = params.m_repeats
    spins = np.empty((m, n), dtype=np.int8)
    energies = np.empty(m)

    def run(r: int):
        s, e = anneal_once(j_khz, params, [seed, r])
        spins[r] = s
        energies[r] = e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(m)))
    else:
        for r in range(m):
            run(r)
    samples = SampleSet.from_spins(spins, {"source": "anneal", "seed": seed})
    cov = covariance(samples, assume_z2=True)
    return AnnealResult(spins=spins, energies=energies, samples=samples,
                        covariance=cov, params=params)
