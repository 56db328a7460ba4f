"""Quantum spin dynamics under synthesized Ising couplings.

Two engines integrate the Schrodinger equation for

    H = sum_{i != j} J_ij sz_i sz_j + sum_i h_i sz_i + B(t) sum_i sx_i :

an exact 2^N engine (N <= 14) on the full computational basis, and a
collective (N+1)-dimensional engine for the uniform all-to-all model
H = 4 J0/(N-1) Jz^2 + 2 B0 Jx valid in the symmetric Dicke sector, which
the exact engine must reproduce for uniform couplings.

Conventions: sz|0> = +|0>, basis index bit i (LSB = site 0) is 0 for spin
up; the transverse field enters as B * sx with sx|0> = |1>.  Observables
are C1 = (1/N) sum_i <sz_i> and C2 = (1/N^2) sum_ij <sz_i sz_j> with the
i = j terms included.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .analysis import SampleSet
from .errors import CapacityError
from .ising import IsingCoupling

#: Largest site count for the exact engine (a 2^N state vector).
MAX_EXACT_SPINS = 14


@dataclass(frozen=True)
class RampSchedule:
    """Exponential field ramp B(t) = b0 * exp(-t / tau) over [0, t_total]."""

    b0: float
    tau: float
    t_total: float

    def __post_init__(self):
        if self.tau <= 0 or self.t_total <= 0:
            raise ValueError("tau and t_total must be positive")
        if self.t_total <= 5.0 * self.tau:
            warnings.warn(
                f"ramp lasts only {self.t_total / self.tau:.2f} tau; ground-state "
                "targeting wants t_total > 5 tau", RuntimeWarning, stacklevel=2)

    def field(self, t):
        return self.b0 * np.exp(-np.asarray(t, dtype=float) / self.tau)


@dataclass
class SpinState:
    """Full state vector over 2^n computational basis states."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n,):
            raise ValueError(
                f"amplitude vector must have length 2^{self.n}, got "
                f"{self.amplitudes.shape}")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"state norm is {norm!r}, expected 1")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass
class DickeState:
    """Symmetric-sector state: amplitude k is the Dicke level with k spins
    flipped (Jz eigenvalue m = n/2 - k)."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.n + 1,):
            raise ValueError(
                f"amplitude vector must have length n+1={self.n + 1}, got "
                f"{self.amplitudes.shape}")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"state norm is {norm!r}, expected 1")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def zero_state(n: int) -> SpinState:
    """All spins up: |00...0>."""
    amp = np.zeros(2**n, dtype=complex)
    amp[0] = 1.0
    return SpinState(amp, n)


def plus_state(n: int) -> SpinState:
    """All spins along +x: the uniform superposition."""
    amp = np.full(2**n, 2.0 ** (-n / 2.0), dtype=complex)
    return SpinState(amp, n)


def basis_state(bits) -> SpinState:
    """Computational basis state for a 0/1 site pattern (site i = bit i)."""
    bits = np.asarray(bits, dtype=int)
    n = bits.size
    idx = int((bits * (1 << np.arange(n))).sum())
    amp = np.zeros(2**n, dtype=complex)
    amp[idx] = 1.0
    return SpinState(amp, n)


def dicke_polarized(n: int) -> DickeState:
    """All spins up in the collective basis (k = 0, m = n/2)."""
    amp = np.zeros(n + 1, dtype=complex)
    amp[0] = 1.0
    return DickeState(amp, n)


def _spin_table(n: int) -> np.ndarray:
    """(2^n, n) matrix of sz values (+1 for bit 0) per basis state."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    return 1.0 - 2.0 * bits


def _coupling_arrays(coupling, n_max=MAX_EXACT_SPINS):
    if isinstance(coupling, IsingCoupling):
        j, h = coupling.j, coupling.h
    else:
        j = np.asarray(coupling, dtype=float)
        h = np.zeros(j.shape[0])
    n = j.shape[0]
    if j.shape != (n, n):
        raise ValueError(f"J must be square, got {j.shape}")
    if h.shape != (n,):
        raise ValueError(f"h must have shape ({n},), got {h.shape}")
    if n > n_max:
        raise CapacityError(
            f"exact engine supports at most {n_max} spins, got {n}")
    return j, h, n


@dataclass
class SpinTrajectory:
    """Exact-engine trajectory: amplitudes[t] is the state at times[t]."""

    times: np.ndarray
    amplitudes: np.ndarray
    n: int

    def state(self, i: int) -> SpinState:
        amp = self.amplitudes[i]
        return SpinState(amp / np.linalg.norm(amp), self.n)


@dataclass
class DickeTrajectory:
    times: np.ndarray
    amplitudes: np.ndarray
    n: int

    def state(self, i: int) -> DickeState:
        amp = self.amplitudes[i]
        return DickeState(amp / np.linalg.norm(amp), self.n)


def evolve_exact(coupling, field, t_grid, initial: SpinState | None = None,
                 rtol: float = 1e-11, atol: float = 1e-13) -> SpinTrajectory:
    """Integrate the full 2^N Schrodinger equation.

    Parameters
    ----------
    coupling : IsingCoupling or (N, N) array
        J in rad/s (plain arrays imply h = 0).
    field : float or RampSchedule
        Transverse field B in rad/s, constant or B(t) = b0 exp(-t/tau).
    t_grid : array
        Times (s) at which to record the state; must start at the initial
        time and be increasing.
    initial : SpinState, optional
        Defaults to the all-|+> product state.

    Returns
    -------
    SpinTrajectory
    """
    j, h, n = _coupling_arrays(coupling)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if t_grid.size > 1 and np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if initial is None:
        initial = plus_state(n)
    if initial.n != n:
        raise ValueError(f"initial state has {initial.n} spins, coupling has {n}")

    s = _spin_table(n)
    diag = np.einsum("bi,ij,bj->b", s, j, s) + s @ h
    flips = np.arange(2**n)[None, :] ^ (1 << np.arange(n))[:, None]

    if isinstance(field, RampSchedule):
        def b_of_t(t):
            return float(field.field(t))
    else:
        b_const = float(field)

        def b_of_t(t):
            return b_const

    def rhs(t, y):
        hy = diag * y
        hy += b_of_t(t) * y[flips].sum(axis=0)
        return -1j * hy

    if t_grid.size == 1:
        return SpinTrajectory(t_grid, initial.amplitudes[None, :].copy(), n)
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), initial.amplitudes,
                    t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return SpinTrajectory(sol.t, sol.y.T.copy(), n)


def quasi_adiabatic_ground(coupling, schedule: RampSchedule,
                           initial: SpinState | None = None,
                           rtol: float = 1e-11, atol: float = 1e-13) -> SpinState:
    """Ramp the transverse field down from b0 and return the final state.

    Starting from all-|+> (the ground state at large B for the -H ordering
    probed here), an exponential ramp slow against the minimal gap leaves
    the system near the Ising ground-state manifold.
    """
    _, _, n = _coupling_arrays(coupling)
    traj = evolve_exact(coupling, schedule,
                        np.array([0.0, schedule.t_total]), initial,
                        rtol=rtol, atol=atol)
    return traj.state(-1)


def dicke_hamiltonian(j0: float, b0: float, n: int):
    """Diagonal and symmetric off-diagonal of H in the Dicke basis."""
    if n < 2:
        raise ValueError("the collective engine needs at least 2 spins")
    k = np.arange(n + 1)
    m = n / 2.0 - k
    diag = 4.0 * j0 / (n - 1.0) * m**2
    jj = n / 2.0
    m_lower = m[1:]  # raising from level k to k-1 acts on m_lower
    off = 0.5 * np.sqrt(jj * (jj + 1.0) - m_lower * (m_lower + 1.0))
    return diag, 2.0 * b0 * off


def evolve_dicke(j0: float, b0: float, n: int, t_grid,
                 initial: DickeState | None = None,
                 rtol: float = 1e-11, atol: float = 1e-13) -> DickeTrajectory:
    """Integrate the collective model H = 4 J0/(N-1) Jz^2 + 2 B0 Jx.

    j0 is the Kac-normalized coupling (rad/s), b0 the transverse field
    (rad/s).  The default initial state is fully polarized along +z.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if t_grid.size > 1 and np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if initial is None:
        initial = dicke_polarized(n)
    if initial.n != n:
        raise ValueError(f"initial state has n={initial.n}, expected {n}")
    diag, off = dicke_hamiltonian(j0, b0, n)

    def rhs(t, y):
        hy = diag * y
        hy[:-1] += off * y[1:]
        hy[1:] += off * y[:-1]
        return -1j * hy

    if t_grid.size == 1:
        return DickeTrajectory(t_grid, initial.amplitudes[None, :].copy(), n)
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), initial.amplitudes,
                    t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return DickeTrajectory(sol.t, sol.y.T.copy(), n)


# ---------------------------------------------------------------------------
# observables


@dataclass
class Observables:
    """Spin observables of one state: per-site <sz_i>, pairwise <sz_i sz_j>
    (diagonal = 1), and the site-averaged C1, C2 (i = j terms included)."""

    sz: np.ndarray
    zz: np.ndarray
    c1: float
    c2: float


def observables(state) -> Observables:
    """Evaluate sz / zz / C1 / C2 for a SpinState or DickeState."""
    if isinstance(state, SpinState):
        p = state.probabilities()
        s = _spin_table(state.n)
        sz = p @ s
        zz = s.T @ (s * p[:, None])
        mz = s.sum(axis=1)
        c1 = float(p @ mz) / state.n
        c2 = float(p @ mz**2) / state.n**2
        return Observables(sz=sz, zz=zz, c1=c1, c2=c2)
    if isinstance(state, DickeState):
        n = state.n
        p = state.probabilities()
        m = n / 2.0 - np.arange(n + 1)
        jz = float(p @ m)
        jz2 = float(p @ m**2)
        c1 = 2.0 * jz / n
        c2 = 4.0 * jz2 / n**2
        zz_off = (4.0 * jz2 - n) / (n * (n - 1.0))
        zz = np.full((n, n), zz_off)
        np.fill_diagonal(zz, 1.0)
        return Observables(sz=np.full(n, c1), zz=zz, c1=c1, c2=c2)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _running_time_average(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Trapezoid running average (1/(t-t0)) integral; first point = value."""
    if times.size == 1:
        return values.copy()
    integral = cumulative_trapezoid(values, times, initial=0.0)
    span = times - times[0]
    out = np.empty_like(values)
    out[0] = values[0]
    out[1:] = integral[1:] / span[1:]
    return out


@dataclass
class TrajectoryObservables:
    times: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    bar_c1: np.ndarray
    bar_c2: np.ndarray


def trajectory_observables(traj) -> TrajectoryObservables:
    """C1(t), C2(t) and their running time averages along a trajectory."""
    if isinstance(traj, SpinTrajectory):
        s = _spin_table(traj.n)
        mz = s.sum(axis=1)
        p = np.abs(traj.amplitudes) ** 2
        p = p / p.sum(axis=1, keepdims=True)
        c1 = (p @ mz) / traj.n
        c2 = (p @ mz**2) / traj.n**2
    elif isinstance(traj, DickeTrajectory):
        m = traj.n / 2.0 - np.arange(traj.n + 1)
        p = np.abs(traj.amplitudes) ** 2
        p = p / p.sum(axis=1, keepdims=True)
        c1 = 2.0 * (p @ m) / traj.n
        c2 = 4.0 * (p @ m**2) / traj.n**2
    else:
        raise TypeError(f"unsupported trajectory type {type(traj).__name__}")
    return TrajectoryObservables(
        times=traj.times, c1=c1, c2=c2,
        bar_c1=_running_time_average(traj.times, c1),
        bar_c2=_running_time_average(traj.times, c2))


def hamiltonian_expectation(state: SpinState, coupling, field_value: float) -> float:
    """<H> for the exact engine at a fixed field value (rad/s)."""
    j, h, n = _coupling_arrays(coupling)
    if state.n != n:
        raise ValueError("state size does not match coupling")
    s = _spin_table(n)
    diag = np.einsum("bi,ij,bj->b", s, j, s) + s @ h
    flips = np.arange(2**n)[None, :] ^ (1 << np.arange(n))[:, None]
    psi = state.amplitudes
    hpsi = diag * psi + field_value * psi[flips].sum(axis=0)
    return float(np.real(np.vdot(psi, hpsi)))


# ---------------------------------------------------------------------------
# sampling


def sample_bitstrings(state, m: int, seed: int) -> SampleSet:
    """Draw m site-resolved bitstrings from a state (bit 0 = spin up).

    For the exact engine this samples basis states from |psi|^2.  For the
    collective engine the excitation number k is drawn from the Dicke-level
    populations and the k flipped sites are placed uniformly at random, the
    site marginal of a symmetric state.
    """
    if m < 1:
        raise ValueError(f"need at least one sample, got m={m}")
    rng = np.random.default_rng(seed)
    meta = {"seed": seed}
    if isinstance(state, SpinState):
        p = state.probabilities()
        idx = rng.choice(p.size, size=m, p=p / p.sum())
        bits = ((idx[:, None] >> np.arange(state.n)[None, :]) & 1).astype(np.uint8)
        meta["source"] = "exact"
        return SampleSet(bits, meta)
    if isinstance(state, DickeState):
        p = state.probabilities()
        ks = rng.choice(state.n + 1, size=m, p=p / p.sum())
        bits = np.zeros((m, state.n), dtype=np.uint8)
        for row, k in enumerate(ks):
            if k:
                bits[row, rng.choice(state.n, size=int(k), replace=False)] = 1
        meta["source"] = "dicke"
        return SampleSet(bits, meta)
    raise TypeError(f"unsupported state type {type(state).__name__}")
