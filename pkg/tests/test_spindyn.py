import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from ion2d.errors import CapacityError
from ion2d.spindyn import (MAX_EXACT_SPINS, DickeState, RampSchedule,
                           SpinState, basis_state, dicke_polarized,
                           evolve_dicke, evolve_exact, hamiltonian_expectation,
                           observables, plus_state, quasi_adiabatic_ground,
                           sample_bitstrings, trajectory_observables,
                           zero_state)

TWO_PI = 2 * np.pi

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])


def site_op(op, i, n):
    """Operator acting on site i with bit i of the basis index = site i."""
    return np.kron(np.eye(2 ** (n - 1 - i)), np.kron(op, np.eye(2 ** i)))


def dense_hamiltonian(j, h, b, n):
    """Independent kron-product construction of the exact-engine H."""
    dim = 2 ** n
    ham = np.zeros((dim, dim))
    for i in range(n):
        for k in range(n):
            if j[i, k] != 0.0:
                ham += j[i, k] * site_op(SZ, i, n) @ site_op(SZ, k, n)
        ham += h[i] * site_op(SZ, i, n)
        ham += b * site_op(SX, i, n)
    return ham


def test_single_spin_rabi_analytic():
    # H = B sx from |0>: <sz>(t) = cos(2 B t)
    b = TWO_PI * 1e3
    t = np.linspace(0, 2e-3, 60)
    traj = evolve_exact(np.zeros((1, 1)), b, t, initial=zero_state(1))
    obs = trajectory_observables(traj)
    assert np.abs(obs.c1 - np.cos(2 * b * t)).max() < 1e-9


def test_exact_engine_matches_dense_expm(rng):
    n = 5
    j = rng.normal(0, TWO_PI * 200.0, (n, n))
    j = 0.5 * (j + j.T)
    np.fill_diagonal(j, 0.0)
    b = TWO_PI * 350.0
    ham = dense_hamiltonian(j, 2.0 * j.sum(axis=1), b, n)

    from ion2d.ising import IsingCoupling, kac_j0, longitudinal_field
    cpl = IsingCoupling(j=j, h=longitudinal_field(j), j0=kac_j0(j))
    t_grid = np.linspace(0.0, 3e-3, 7)
    traj = evolve_exact(cpl, b, t_grid)
    psi0 = plus_state(n).amplitudes
    for idx, t in enumerate(t_grid):
        want = expm(-1j * ham * t) @ psi0
        assert np.abs(traj.amplitudes[idx] - want).max() < 1e-8


def test_ramp_matches_dense_ivp(rng):
    n = 4
    j = rng.normal(0, TWO_PI * 300.0, (n, n))
    j = 0.5 * (j + j.T)
    np.fill_diagonal(j, 0.0)
    sched = RampSchedule(b0=TWO_PI * 2e3, tau=0.5e-3, t_total=3e-3)
    ham_zz = dense_hamiltonian(j, np.zeros(n), 0.0, n)
    ham_x = sum(site_op(SX, i, n) for i in range(n))

    def rhs(t, y):
        return -1j * (ham_zz + sched.field(t) * ham_x) @ y

    t_grid = np.linspace(0.0, sched.t_total, 5)
    psi0 = plus_state(n).amplitudes
    sol = solve_ivp(rhs, (0, sched.t_total), psi0.astype(complex),
                    t_eval=t_grid, rtol=1e-11, atol=1e-13)
    # plain arrays imply h = 0 in the engine
    traj = evolve_exact(j, sched, t_grid)
    assert np.abs(traj.amplitudes - sol.y.T).max() < 1e-8


def test_basis_state_observables():
    state = basis_state([0, 1, 0])
    obs = observables(state)
    assert np.allclose(obs.sz, [1.0, -1.0, 1.0])
    assert obs.c1 == pytest.approx(1.0 / 3.0)
    assert obs.c2 == pytest.approx(1.0 / 9.0)
    assert np.allclose(np.diag(obs.zz), 1.0)
    assert obs.zz[0, 1] == pytest.approx(-1.0)


def test_c2_includes_diagonal():
    # product |+>^n: <sz sz> vanishes off-diagonal, so C2 = 1/n
    n = 6
    obs = observables(plus_state(n))
    assert obs.c2 == pytest.approx(1.0 / n, abs=1e-12)
    assert obs.c1 == pytest.approx(0.0, abs=1e-12)


def test_dicke_polarized_observables():
    obs = observables(dicke_polarized(10))
    assert obs.c1 == pytest.approx(1.0)
    assert obs.c2 == pytest.approx(1.0)


def test_dicke_matches_exact_small():
    n = 6
    j0 = TWO_PI * 0.31e3
    b0 = 1.2 * j0
    j = np.full((n, n), j0 / (n - 1))
    np.fill_diagonal(j, 0.0)
    t_grid = np.linspace(0.0, 4e-3, 40)
    obs_e = trajectory_observables(evolve_exact(j, b0, t_grid, initial=zero_state(n)))
    obs_d = trajectory_observables(evolve_dicke(j0, b0, n, t_grid))
    assert np.abs(obs_e.c1 - obs_d.c1).max() < 1e-9
    assert np.abs(obs_e.c2 - obs_d.c2).max() < 1e-9


def test_running_average_matches_manual_trapezoid():
    t = np.linspace(0.0, 3e-3, 50)
    traj = evolve_dicke(TWO_PI * 0.31e3, TWO_PI * 0.4e3, 20, t)
    obs = trajectory_observables(traj)
    manual = np.trapezoid(obs.c2, t) / (t[-1] - t[0])
    assert obs.bar_c2[-1] == pytest.approx(manual, rel=1e-12)
    assert obs.bar_c1[0] == obs.c1[0]


def test_quasi_adiabatic_reaches_ferromagnet():
    # the ramp tracks the ground of -H, so J > 0 orders ferromagnetically
    n = 4
    j = np.full((n, n), TWO_PI * 1e3 / (n - 1))
    np.fill_diagonal(j, 0.0)
    sched = RampSchedule(b0=TWO_PI * 4e3, tau=1.5e-3, t_total=10e-3)
    final = quasi_adiabatic_ground(j, sched)
    p = final.probabilities()
    # weight concentrates on the two polarized states |00..0> and |11..1>
    assert p[0] + p[-1] > 0.9


def test_hamiltonian_expectation_matches_dense(rng):
    n = 4
    j = rng.normal(0, TWO_PI * 100.0, (n, n))
    j = 0.5 * (j + j.T)
    np.fill_diagonal(j, 0.0)
    b = TWO_PI * 150.0
    ham = dense_hamiltonian(j, np.zeros(n), b, n)
    amp = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    amp /= np.linalg.norm(amp)
    state = SpinState(amp, n)
    want = float(np.real(np.vdot(amp, ham @ amp)))
    assert hamiltonian_expectation(state, j, b) == pytest.approx(want, rel=1e-12)


def test_capacity_guard():
    n = MAX_EXACT_SPINS + 1
    j = np.zeros((n, n))
    with pytest.raises(CapacityError):
        evolve_exact(j, 0.0, np.array([0.0, 1e-4]))


def test_state_norm_validation():
    with pytest.raises(ValueError, match="norm"):
        SpinState(np.array([1.0, 1.0]), 1)
    with pytest.raises(ValueError, match="norm"):
        DickeState(np.array([1.0, 1.0, 1.0]), 2)


def test_ramp_warns_when_short():
    with pytest.warns(RuntimeWarning, match="tau"):
        RampSchedule(b0=1.0, tau=1e-3, t_total=2e-3)


def test_sampling_basis_state_is_deterministic():
    samples = sample_bitstrings(basis_state([1, 0, 1, 1]), 20, seed=9)
    assert samples.m == 20
    assert np.all(samples.bits == np.array([1, 0, 1, 1], dtype=np.uint8))


def test_sampling_seed_reproducible():
    state = plus_state(6)
    a = sample_bitstrings(state, 50, seed=3)
    b = sample_bitstrings(state, 50, seed=3)
    c = sample_bitstrings(state, 50, seed=4)
    assert np.array_equal(a.bits, b.bits)
    assert not np.array_equal(a.bits, c.bits)


def test_sampling_plus_state_marginal():
    samples = sample_bitstrings(plus_state(8), 4000, seed=1)
    mean = samples.bits.mean(axis=0)
    # binomial 4-sigma band around 1/2
    band = 4 * 0.5 / np.sqrt(4000)
    assert np.all(np.abs(mean - 0.5) < band)


def test_sampling_dicke_level_weight():
    n = 9
    amp = np.zeros(n + 1, dtype=complex)
    amp[3] = 1.0  # exactly 3 excitations
    samples = sample_bitstrings(DickeState(amp, n), 200, seed=5)
    assert np.all(samples.bits.sum(axis=1) == 3)
    assert samples.metadata["source"] == "dicke"


def test_evolve_exact_grid_validation():
    j = np.zeros((2, 2))
    with pytest.raises(ValueError):
        evolve_exact(j, 0.0, np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        evolve_exact(j, 0.0, np.zeros((2, 2)))
