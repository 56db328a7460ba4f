"""Motional thermometry from collective sideband spectroscopy.

Weak flat-top probes on the red and blue sidebands of mode k excite with
probabilities summed over ions,

    P_r = nbar     * sum_i (T eta_k b_ik Omega_i)^2,
    P_b = (nbar+1) * sum_i (T eta_k b_ik Omega_i)^2,

so the occupation follows from the ratio alone: nbar = P_r / (P_b - P_r).
With state-dependent fluorescence the same logic runs on photon counts:
if N_max is the all-bright level and the sidebands pull it down in
proportion to the excitation, nbar = (N_max - N_r) / (N_r - N_b).
Averaging windows pool numerators and denominators across points before
taking the ratio, which keeps the estimator unbiased under Poisson noise
far better than averaging per-point ratios.

Validity: the perturbative expressions need eta Omega T well below pi/2
and excitation probabilities well below saturation.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError

TWO_PI = 2.0 * math.pi


@dataclass
class SidebandDrive:
    """Probe parameters for one mode: pulse duration T (s), carrier Rabi
    rate per ion (rad/s, scalar or (N,)), Lamb-Dicke eta_k, mode vector
    b_ik."""

    duration: float
    rabi: object
    eta: float
    mode_vector: np.ndarray

    def __post_init__(self):
        self.mode_vector = np.asarray(self.mode_vector, dtype=float)
        if self.mode_vector.ndim != 1:
            raise ValueError("mode_vector must be 1-D")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def rabi_array(self) -> np.ndarray:
        om = np.asarray(self.rabi, dtype=float)
        if om.ndim == 0:
            return np.full(self.mode_vector.size, float(om))
        if om.shape != self.mode_vector.shape:
            raise ValueError("rabi must be scalar or match the mode vector")
        return om

    def weights(self) -> np.ndarray:
        """Per-ion excitation weights (T eta b_i Omega_i)^2."""
        return (self.duration * self.eta * self.mode_vector * self.rabi_array()) ** 2

    @property
    def weight_sum(self) -> float:
        return float(self.weights().sum())

    @property
    def is_perturbative(self) -> bool:
        """eta * mean Rabi * T below pi/2, the flat-top small-angle regime."""
        return self.eta * float(self.rabi_array().mean()) * self.duration <= 0.5 * math.pi


def excitation_probabilities(nbar: float, drive: SidebandDrive):
    """Red- and blue-sideband excitation probabilities (P_r, P_b)."""
    if nbar < 0:
        raise ValueError(f"nbar must be non-negative, got {nbar}")
    s = drive.weight_sum
    p_r = nbar * s
    p_b = (nbar + 1.0) * s
    if p_b > 0.5:
        warnings.warn(
            f"blue-sideband excitation {p_b:.3g} is outside the perturbative "
            "regime; estimates from it are biased", RuntimeWarning, stacklevel=2)
    return p_r, p_b


def estimate_nbar(p_r: float, p_b: float) -> float:
    """nbar = P_r / (P_b - P_r); requires 0 <= P_r < P_b."""
    if p_r < 0 or p_b < 0:
        raise EstimationError("excitation probabilities must be non-negative")
    if p_b <= p_r:
        raise EstimationError(
            f"blue excitation ({p_b!r}) must exceed red ({p_r!r})")
    return p_r / (p_b - p_r)


def estimate_nbar_pooled(p_r, p_b) -> float:
    """Pooled ratio over an averaging window: sums before dividing."""
    p_r = np.asarray(p_r, dtype=float)
    p_b = np.asarray(p_b, dtype=float)
    return estimate_nbar(float(p_r.sum()), float(p_b.sum()))


@dataclass(frozen=True)
class PhotonCounts:
    """Fluorescence levels of one sideband measurement: all-bright count
    n_max, red-probe count n_r, blue-probe count n_b."""

    n_max: float
    n_r: float
    n_b: float


def expected_counts(nbar: float, drive: SidebandDrive, bright,
                    dark: float = 0.0) -> PhotonCounts:
    """Forward model of the count levels.

    bright : (N,) per-ion bright counts N_i; dark : the ion-independent
    floor N_0.  Each excited ion goes dark in proportion to its share of
    the sideband excitation: N_r = N_0 + sum_i (1 - nbar w_i) N_i and
    N_b likewise with nbar + 1, where w_i is the per-ion weight.
    """
    if nbar < 0:
        raise ValueError(f"nbar must be non-negative, got {nbar}")
    bright = np.asarray(bright, dtype=float)
    w = drive.weights()
    if bright.shape != w.shape:
        raise ValueError("bright counts must match the mode vector length")
    if np.any((nbar + 1.0) * w > 1.0):
        warnings.warn(
            "per-ion excitation exceeds 1 in the linearized count model",
            RuntimeWarning, stacklevel=2)
    n_max = dark + bright.sum()
    n_r = dark + ((1.0 - nbar * w) * bright).sum()
    n_b = dark + ((1.0 - (nbar + 1.0) * w) * bright).sum()
    return PhotonCounts(n_max=float(n_max), n_r=float(n_r), n_b=float(n_b))


def estimate_nbar_counts(counts: PhotonCounts) -> float:
    """nbar = (N_max - N_r) / (N_r - N_b) from fluorescence levels."""
    if counts.n_r <= counts.n_b:
        raise EstimationError(
            f"red count ({counts.n_r!r}) must exceed blue count "
            f"({counts.n_b!r}); the sideband contrast is inverted or zero")
    if counts.n_max < counts.n_r:
        raise EstimationError(
            f"all-bright count ({counts.n_max!r}) must be at least the red "
            f"count ({counts.n_r!r})")
    return (counts.n_max - counts.n_r) / (counts.n_r - counts.n_b)


def estimate_nbar_counts_pooled(n_max, n_r, n_b,
                                with_error: bool = False):
    """Pooled count estimator over an averaging window.

    Sums numerator A = sum(N_max - N_r) and denominator B = sum(N_r - N_b)
    before the ratio.  With ``with_error`` the first-order Poisson variance
    is propagated through nbar = A / B including the correlation from the
    shared N_r: var A = sum(N_max + N_r), var B = sum(N_r + N_b),
    cov(A, B) = -sum N_r.  Returns nbar or (nbar, sigma).
    """
    n_max = np.asarray(n_max, dtype=float)
    n_r = np.asarray(n_r, dtype=float)
    n_b = np.asarray(n_b, dtype=float)
    a = float((n_max - n_r).sum())
    b = float((n_r - n_b).sum())
    if b <= 0:
        raise EstimationError("pooled red count must exceed pooled blue count")
    if a < 0:
        raise EstimationError("pooled all-bright count is below the red count")
    nbar = a / b
    if not with_error:
        return nbar
    var_a = float((n_max + n_r).sum())
    var_b = float((n_r + n_b).sum())
    cov_ab = -float(n_r.sum())
    var = var_a / b**2 + (a**2 / b**4) * var_b - 2.0 * (a / b**3) * cov_ab
    return nbar, math.sqrt(max(var, 0.0))


# ---------------------------------------------------------------------------
# sideband-scan files


def read_scan_csv(path):
    """Read a sideband scan: columns detuning_hz, red_counts, blue_counts,
    n_max.  Returns four float arrays."""
    det, red, blue, nmax = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["detuning_hz", "red_counts",
                                           "blue_counts", "n_max"]:
            raise ValueError(f"unexpected scan CSV header: {header}")
        for rec in reader:
            det.append(float(rec[0]))
            red.append(float(rec[1]))
            blue.append(float(rec[2]))
            nmax.append(float(rec[3]))
    return (np.asarray(det), np.asarray(red), np.asarray(blue), np.asarray(nmax))


def estimate_scan(detuning, red, blue, n_max, mode_centers,
                  points_per_mode: int = 3):
    """Per-mode occupations from a scan.

    For each center frequency the ``points_per_mode`` scan points nearest
    to it form the averaging window; the pooled count estimator with
    Poisson errors runs on each window.  Returns a list of dicts with the
    center, the window indices, nbar, and sigma.
    """
    detuning = np.asarray(detuning, dtype=float)
    if points_per_mode < 1:
        raise ValueError("points_per_mode must be >= 1")
    if detuning.size < points_per_mode:
        raise ValueError("scan has fewer points than the averaging window")
    results = []
    for center in mode_centers:
        idx = np.argsort(np.abs(detuning - center), kind="stable")[:points_per_mode]
        idx = np.sort(idx)
        nbar, sigma = estimate_nbar_counts_pooled(
            np.asarray(n_max)[idx], np.asarray(red)[idx], np.asarray(blue)[idx],
            with_error=True)
        results.append({"center_hz": float(center),
                        "points": idx.tolist(),
                        "nbar": nbar, "sigma": sigma})
    return results
