"""Numba kernels for the hot loops: Coulomb forces, damped Verlet, annealing.

Everything here works on plain arrays in dimensionless units and is kept
free of Python objects so the loops compile to tight machine code.  The
kernels release the GIL so trial-level threading actually runs in parallel.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def coulomb_trap_force(pos, wsq, force):
    """Fill ``force`` with -grad U for the trap+Coulomb potential.

    pos : (N, 3) positions, force : (N, 3) output, wsq : (3,) squared
    dimensionless trap frequencies.  Returns (potential energy, minimum
    pair distance).
    """
    n = pos.shape[0]
    energy = 0.0
    min_dist = 1.0e300
    for i in range(n):
        for a in range(3):
            force[i, a] = -wsq[a] * pos[i, a]
            energy += 0.5 * wsq[a] * pos[i, a] * pos[i, a]
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            r = math.sqrt(r2)
            if r < min_dist:
                min_dist = r
            energy += 1.0 / r
            inv_r3 = 1.0 / (r2 * r)
            fx = dx * inv_r3
            fy = dy * inv_r3
            fz = dz * inv_r3
            force[i, 0] += fx
            force[i, 1] += fy
            force[i, 2] += fz
            force[j, 0] -= fx
            force[j, 1] -= fy
            force[j, 2] -= fz
    return energy, min_dist


@njit(cache=True, nogil=True)
def damped_verlet(pos, vel, wsq, gamma, dt, n_steps, abort_dist):
    """Integrate damped motion in the trap+Coulomb potential, in place.

    Velocity-Verlet splitting with the damping applied as an exact
    exponential velocity contraction mid-step: kick dt/2, drift dt/2,
    contract by exp(-gamma dt), drift dt/2, kick dt/2.  Second order in dt
    and reduces to plain velocity Verlet at gamma = 0.

    Returns 0 on success, 1 if any pair distance fell below ``abort_dist``
    (integration stops at that step; pos/vel hold the last state).
    """
    n = pos.shape[0]
    force = np.empty((n, 3))
    _, min_dist = coulomb_trap_force(pos, wsq, force)
    if min_dist < abort_dist:
        return 1
    damp = math.exp(-gamma * dt)
    half = 0.5 * dt
    for _ in range(n_steps):
        for i in range(n):
            for a in range(3):
                vel[i, a] += half * force[i, a]
                pos[i, a] += half * vel[i, a]
        for i in range(n):
            for a in range(3):
                vel[i, a] *= damp
                pos[i, a] += half * vel[i, a]
        _, min_dist = coulomb_trap_force(pos, wsq, force)
        if min_dist < abort_dist:
            return 1
        for i in range(n):
            for a in range(3):
                vel[i, a] += half * force[i, a]
    return 0


@njit(cache=True, nogil=True)
def metropolis_anneal(j_mat, spins, betas, sites, urand):
    """Run single-flip Metropolis sweeps over an Ising energy, in place.

    j_mat : (N, N) symmetric coupling matrix, zero diagonal, in the energy
    units matching ``betas``.  spins : (N,) of +-1 (int8), flipped in place.
    betas : (n_sweep,) inverse temperatures.  sites/urand : flattened
    (n_sweep * N,) pre-drawn flip sites and uniforms.

    Energy convention E(s) = -sum_{i != j} J_ij s_i s_j; a single flip of
    spin i changes it by dE = 4 s_i sum_j J_ij s_j.  Returns the final
    energy.
    """
    n = spins.shape[0]
    n_sweep = betas.shape[0]
    local = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc += j_mat[i, k] * spins[k]
        local[i] = acc
    idx = 0
    for sweep in range(n_sweep):
        beta = betas[sweep]
        for _ in range(n):
            i = sites[idx]
            de = 4.0 * spins[i] * local[i]
            if de <= 0.0 or urand[idx] < math.exp(-beta * de):
                s_old = spins[i]
                spins[i] = -s_old
                for k in range(n):
                    local[k] -= 2.0 * s_old * j_mat[i, k]
            idx += 1
    energy = 0.0
    for i in range(n):
        energy -= spins[i] * local[i]
    return energy
