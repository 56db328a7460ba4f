"""End-to-end acceptance checks.

Each criterion prints one ``[criterion N] PASS/FAIL`` line with the
measured numbers (written straight to the terminal, bypassing capture)
and then asserts.  The collision-contrast criterion dominates the
runtime; everything else is seconds to a few minutes on one core.
"""

import numpy as np
import pytest

from ion2d import analysis, annealing, ising, phonons, sideband, spindyn
from ion2d.crystal import (IonCrystal, nearest_neighbor_spacing,
                           potential_and_gradient, solve_equilibrium)
from ion2d.stability import (CollisionConfig, GasSpecies, damped_md,
                             run_collision_trials)
from ion2d.units import COULOMB_K, YB171

TWO_PI = 2 * np.pi


def _report(capsys, num, ok, detail):
    line = f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} {detail}"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


def test_criterion_01_two_ion_analytics(trap300, capsys):
    crystal = solve_equilibrium(trap300, YB171, 2, seed=0)
    d = nearest_neighbor_spacing(crystal)
    d_theory = (2.0 * COULOMB_K * YB171.charge**2
                / (YB171.mass * trap300.omega_z**2)) ** (1.0 / 3.0)
    err_d = abs(d - d_theory) / d_theory
    modes = phonons.transverse_modes(crystal, trap300)
    want = np.array([trap300.omega_y,
                     np.sqrt(trap300.omega_y**2 - trap300.omega_z**2)])
    err_m = np.abs(modes.frequencies - want).max() / trap300.omega_y
    ok = err_d < 1e-9 and err_m < 1e-9
    _report(capsys, 1, ok, f"spacing rel {err_d:.2e}, modes rel {err_m:.2e} "
                           "(limit 1e-9)")


def test_criterion_02_lamb_dicke(modes300, capsys):
    eta_com = float(modes300.lamb_dicke[0])  # COM carries the smallest eta
    ok = abs(eta_com - 0.114) <= 0.004
    _report(capsys, 2, ok, f"eta(COM) = {eta_com:.5f} (want 0.114 +- 0.004)")


def test_criterion_03_mode_offsets(modes300, capsys):
    offs_khz = modes300.offsets_below_com() / TWO_PI / 1e3
    off4, off19 = offs_khz[3], offs_khz[18]
    ok = abs(off4 - 24.0) <= 3.0 and abs(off19 - 139.2) <= 6.0
    _report(capsys, 3, ok, f"mode-4 offset {off4:.2f} kHz (24.0 +- 3), "
                           f"mode-19 offset {off19:.2f} kHz (139.2 +- 6)")


def test_criterion_04_rank_one_coupling(modes300, capsys):
    tone = ising.DriveTone(mu=modes300.frequencies[3] + TWO_PI * 1e3,
                           omega_eff=TWO_PI * 10e3)
    coupling = ising.single_mode_coupling(modes300, 4, tone)
    v = ising.single_mode_vector(modes300, 4, tone)
    restored = coupling.j + np.diag(v * v)  # positive detuning
    s = np.linalg.svd(restored, compute_uv=False)
    ratio = s[1] / s[0]
    truncated = ising.compute_jij(modes300, [tone], mode_indices=[4])
    scale = np.abs(coupling.j).max()
    trunc_err = np.abs(truncated.j - coupling.j).max() / scale
    ok = ratio < 1e-10 and trunc_err <= 1e-14
    _report(capsys, 4, ok, f"sigma2/sigma1 = {ratio:.2e} (limit 1e-10), "
                           f"truncation rel {trunc_err:.2e} (limit 1e-14)")


def test_criterion_05_forces_and_integrator(trap300, capsys):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        while True:
            pos = rng.uniform(-1.5, 1.5, (6, 3))
            diff = pos[:, None] - pos[None, :]
            r = np.sqrt((diff**2).sum(axis=2) + np.eye(6))
            if r.min() > 0.3:
                break
        _, grad = potential_and_gradient(pos, trap300, YB171, dimensionless=True)
        fd = np.empty_like(grad)
        h = 1e-6
        for i in range(6):
            for a in range(3):
                p1, p2 = pos.copy(), pos.copy()
                p1[i, a] += h
                p2[i, a] -= h
                e1, _ = potential_and_gradient(p1, trap300, YB171,
                                               dimensionless=True)
                e2, _ = potential_and_gradient(p2, trap300, YB171,
                                               dimensionless=True)
                fd[i, a] = (e1 - e2) / (2 * h)
        worst = max(worst, np.abs(fd - grad).max() / np.abs(grad).max())

    gamma, v0 = 8e3, 1.0
    wy = trap300.omega_y
    wp = np.sqrt(wy**2 - (gamma / 2) ** 2)
    c0 = IonCrystal(np.zeros((1, 3)), YB171)
    vel0 = np.array([[0.0, v0, 0.0]])
    t_end = round(5.0 / gamma / 1e-9) * 1e-9
    fin, vel = damped_md(c0, vel0, trap300, gamma, t_end, 1e-9)
    y, vy = fin.positions[0, 1], vel[0, 1]
    amp = np.sqrt(y**2 + ((vy + gamma * y / 2) / wp) ** 2)
    env_err = abs(amp - v0 / wp * np.exp(-gamma * t_end / 2)) / (
        v0 / wp * np.exp(-gamma * t_end / 2))

    def endpoint_error(dt):
        fin, _ = damped_md(c0, vel0, trap300, gamma, 200e-9, dt)
        exact = v0 / wp * np.exp(-gamma * 100e-9) * np.sin(wp * 200e-9)
        return abs(fin.positions[0, 1] - exact)

    r1 = endpoint_error(2e-9) / endpoint_error(1e-9)
    r2 = endpoint_error(1e-9) / endpoint_error(0.5e-9)
    ok = worst < 1e-6 and env_err < 0.01 and 3.5 < r1 < 4.5 and 3.5 < r2 < 4.5
    _report(capsys, 5, ok, f"FD rel {worst:.2e} (limit 1e-6), envelope rel "
                           f"{env_err:.2e} (limit 0.01), dt ratios {r1:.2f}/"
                           f"{r2:.2f} (want ~4)")


def test_criterion_06_dicke_exact_cross_oracle(capsys):
    n = 8
    j0 = TWO_PI * 0.31e3
    b0 = 1.43 * j0
    j = np.full((n, n), j0 / (n - 1))
    np.fill_diagonal(j, 0.0)
    t_grid = np.linspace(0.0, 6e-3, 100)
    obs_e = spindyn.trajectory_observables(
        spindyn.evolve_exact(j, b0, t_grid, initial=spindyn.zero_state(n)))
    obs_d = spindyn.trajectory_observables(
        spindyn.evolve_dicke(j0, b0, n, t_grid))
    d1 = np.abs(np.abs(obs_e.c1) - np.abs(obs_d.c1)).max()
    d2 = np.abs(np.abs(obs_e.c2) - np.abs(obs_d.c2)).max()
    ok = d1 < 1e-6 and d2 < 1e-6
    _report(capsys, 6, ok, f"|C1| discrepancy {d1:.2e}, |C2| {d2:.2e} "
                           "(limit 1e-6)")


def test_criterion_07_transition_dip(capsys):
    j0 = TWO_PI * 0.31e3
    ratios = np.arange(0.5, 3.0001, 0.25)
    t_grid = np.linspace(0.0, 7.5e-3, 301)
    bars = np.array([
        spindyn.trajectory_observables(
            spindyn.evolve_dicke(j0, r * j0, 300, t_grid)).bar_c2[-1]
        for r in ratios
    ])
    dip = float(ratios[np.argmin(bars)])
    ok = 1.0 <= dip <= 2.0
    _report(capsys, 7, ok, f"time-averaged C2 dips at B0/J0 = {dip:.2f} "
                           "(want within [1.0, 2.0])")


def test_criterion_08_annealing_patterns(modes300, capsys):
    # mode-4 pattern on the full crystal
    tone = ising.DriveTone(mu=modes300.frequencies[3] + TWO_PI * 100.0,
                           omega_eff=TWO_PI * 10e3)
    coupling = ising.single_mode_coupling(modes300, 4, tone)
    params = annealing.AnnealParams(n_sweep=100, beta0=0.01, beta1=1.0,
                                    m_repeats=100, convention="angular")
    result = annealing.anneal_ensemble(coupling, params, seed=21)
    pattern = np.sign(modes300.vectors[:, 3])
    frac = (1.0 + np.abs(result.spins @ pattern) / 300.0) / 2.0
    run_rate = float((frac >= 0.95).mean())

    # small random instances against exhaustive enumeration
    rng = np.random.default_rng(31)
    n = 12
    codes = np.arange(2 ** n)
    spins_all = 1 - 2 * ((codes[:, None] >> np.arange(n)) & 1)
    hits = total = 0
    never_below = True
    for inst in range(5):
        j = rng.normal(0.0, 1.0, (n, n))
        j = 0.5 * (j + j.T)
        np.fill_diagonal(j, 0.0)
        ground = (-np.einsum("bi,ij,bj->b", spins_all, j, spins_all)).min()
        for rep in range(10):
            _, energy = annealing.anneal_once(
                j, annealing.AnnealParams(n_sweep=100, beta0=0.01, beta1=1.0,
                                          m_repeats=1), seed=[31, inst, rep])
            never_below &= energy >= ground - 1e-9
            hits += abs(energy - ground) <= 1e-9
            total += 1
    hit_rate = hits / total
    ok = run_rate >= 0.90 and never_below and hit_rate >= 0.50
    _report(capsys, 8, ok, f"mode-4 pattern: {100 * run_rate:.0f}% of runs "
                           f">= 95% sites (want >= 90%); enumeration: never "
                           f"below ground {never_below}, hit rate "
                           f"{hit_rate:.2f} (want >= 0.5)")


def test_criterion_09_collision_contrast(crystal64, trap300, capsys):
    cfg = CollisionConfig(gamma=8.0e3, t_evolve=500e-6, dt=2e-9, n_trials=100,
                          thresholds=(0.5e-6, 1.0e-6))
    cold = run_collision_trials(crystal64, trap300, GasSpecies(6.1), cfg,
                                seed=17)
    hot = run_collision_trials(crystal64, trap300, GasSpecies(300.0), cfg,
                               seed=17)
    frac_cold = cold.exceedance(matched=True)[0.5e-6]
    frac_hot = hot.exceedance(matched=True)[1.0e-6]
    bound = True
    for res in (cold, hot):
        good = ~res.failed
        bound &= bool(np.all(res.matched_dev[good] <= res.max_dev[good] + 1e-18))
    ok = frac_cold <= 0.10 and frac_hot >= 0.50 and bound
    _report(capsys, 9, ok, f"6.1 K matched > 0.5 um: {frac_cold:.2f} "
                           f"(limit 0.10); 300 K matched > 1 um: "
                           f"{frac_hot:.2f} (want >= 0.50); matched <= raw "
                           f"in every trial: {bound}")


@pytest.fixture(scope="module")
def synthetic_partition():
    rng = np.random.default_rng(123)
    p_up = rng.uniform(0.2, 0.8, 300)
    bits = (rng.random((4912, 300)) < p_up).astype(np.uint8)
    reference = analysis.SampleSet(bits)
    return reference, analysis.build_bubbles(reference, 500, seed=7)


def test_criterion_10_chi2_machinery(synthetic_partition, capsys):
    # p-value spot check on an exactly constructed statistic
    dev = np.array([24, -24, 15, -15, 6, -6, 3, -3, 0, 0])
    counts = 100 + dev  # chi2 = sum dev^2 / 100 = 16.92 on dof 9
    result = analysis.chi2_test(counts, np.full(10, 0.1))
    p_err = abs(result.p_value - 0.050)

    _, partition = synthetic_partition
    probs, _ = analysis.expected_probabilities(partition)
    rng = np.random.default_rng(7)
    pvals = np.array([
        analysis.chi2_test(rng.multinomial(1000, probs), probs).p_value
        for _ in range(200)
    ])
    rejection = float((pvals < 0.05).mean())

    # an alternative at total-variation distance 0.3
    q = probs.copy()
    order = np.argsort(q)[::-1]
    heavy, light = order[: q.size // 2], order[q.size // 2:]
    q[heavy] -= 0.3 * q[heavy] / q[heavy].sum()
    q[light] += 0.3 * q[light] / q[light].sum()
    assert 0.5 * np.abs(q - probs).sum() == pytest.approx(0.3, abs=1e-12)
    rng = np.random.default_rng(11)
    power = float(np.mean([
        analysis.chi2_test(rng.multinomial(1000, q), probs).p_value < 1e-6
        for _ in range(100)
    ]))
    ok = (result.chi2 == pytest.approx(16.92) and result.dof == 9
          and p_err <= 1e-3 and 0.02 <= rejection <= 0.08 and power >= 0.99)
    _report(capsys, 10, ok, f"p(16.92, dof 9) = {result.p_value:.6f} "
                            f"(want 0.050 +- 1e-3); calibration rejection "
                            f"{rejection:.3f} (want [0.02, 0.08]); TV-0.3 "
                            f"power {power:.2f} (want >= 0.99)")


def test_criterion_11_bubble_construction(synthetic_partition, capsys):
    _, partition = synthetic_partition
    n_content = sum(1 for b in partition.bubbles if b.ref_count > 0)
    counts_ok = 10 <= n_content <= 11

    rng = np.random.default_rng(40)
    strings = analysis.SampleSet(rng.integers(0, 2, (10_000, 300),
                                              dtype=np.uint8))
    counts = analysis.assign_and_count(partition, strings)
    totality = counts.sum() == 10_000
    # first-cover ordering recomputed from scratch
    centers = np.array([b.center for b in partition.bubbles], dtype=np.uint8)
    radii = np.array([b.radius for b in partition.bubbles])
    packed_c = analysis.pack_bits(centers)
    packed_s = analysis.pack_bits(strings.bits)
    first = np.full(10_000, -1)
    for k in range(len(partition.bubbles)):
        d = np.bitwise_count(packed_s ^ packed_c[k]).sum(axis=1)
        hit = (d <= radii[k]) & (first < 0)
        first[hit] = k
    ordering = (np.bincount(first, minlength=len(partition.bubbles))
                == counts).all() and (first >= 0).all()
    ok = counts_ok and totality and bool(ordering)
    _report(capsys, 11, ok, f"{n_content} occupied bubbles (+ catch-all, "
                            f"want 10-11); totality {totality} and "
                            f"first-cover ordering {ordering} on 1e4 strings")


def test_criterion_12_sideband_estimator(capsys):
    weak = sideband.SidebandDrive(duration=5e-6, rabi=TWO_PI * 5e3, eta=0.11,
                                  mode_vector=[0.3, -0.3, 0.2, 0.1])
    # moderate contrast so the count differences stay far from rounding
    probe = sideband.SidebandDrive(duration=20e-6, rabi=TWO_PI * 29e3,
                                   eta=0.11, mode_vector=[0.5, -0.5, 0.5, 0.5])
    bright = np.array([200.0, 150.0, 220.0, 180.0])
    worst = 0.0
    for nbar in np.linspace(0.0, 10.0, 21):
        p_r, p_b = sideband.excitation_probabilities(nbar, weak)
        worst = max(worst, abs(sideband.estimate_nbar(p_r, p_b) - nbar)
                    / (1.0 + nbar))
        c = sideband.expected_counts(nbar, probe, bright, dark=20.0)
        worst = max(worst, abs(sideband.estimate_nbar_counts(c) - nbar)
                    / (1.0 + nbar))

    drive = sideband.SidebandDrive(duration=80e-6, rabi=TWO_PI * 50e3,
                                   eta=0.11365, mode_vector=np.full(64, 0.125))
    c = sideband.expected_counts(0.8, drive, np.full(64, 1.0))
    scale = 1e5 / (c.n_max + c.n_r + c.n_b)
    c = sideband.expected_counts(0.8, drive, np.full(64, scale))
    levels = np.array([c.n_max, c.n_r, c.n_b])
    rng = np.random.default_rng(5)
    draws = rng.poisson(np.broadcast_to(levels, (1000, 3)))
    median = float(np.median([
        sideband.estimate_nbar_counts(sideband.PhotonCounts(*d))
        for d in draws
    ]))
    ok = worst <= 1e-12 and abs(median - 0.8) <= 0.3
    _report(capsys, 12, ok, f"round-trip rel err {worst:.2e} (limit 1e-12); "
                            f"Poisson MC median {median:.3f} "
                            f"(want 0.8 +- 0.3 at 1e5 total counts)")
