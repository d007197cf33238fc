"""Vectorized numpy force and integrator kernels (fallback backend).

Semantics match the compiled kernels in ``_kernels_cy.pyx``; both consume
identical thermostat noise arrays so backends can be cross-checked.
"""

from __future__ import annotations

import numpy as np

_MIN_BOND_R = 1e-12
_MIN_SIN = 1e-8


def compute_forces(
    positions,
    bonds,
    bond_r0,
    bond_k,
    angles,
    angle_theta0,
    angle_k,
    pairs,
    lj_epsilon,
    lj_sigma,
    lj_cutoff,
    grab_atoms,
    grab_targets,
    grab_k,
    grab_fmax,
    out_forces,
):
    """Fill out_forces with -grad(U); return (potential_energy, bad_bond_index)."""
    out_forces[:] = 0.0
    pe = 0.0

    if len(bonds):
        d = positions[bonds[:, 0]] - positions[bonds[:, 1]]
        r = np.sqrt(np.einsum("ij,ij->i", d, d))
        bad = np.nonzero(r < _MIN_BOND_R)[0]
        if bad.size:
            return 0.0, int(bad[0])
        stretch = r - bond_r0
        pe += float(np.sum(0.5 * bond_k * stretch * stretch))
        f = (-(bond_k * stretch) / r)[:, None] * d
        np.add.at(out_forces, bonds[:, 0], f)
        np.add.at(out_forces, bonds[:, 1], -f)

    if len(angles):
        u = positions[angles[:, 0]] - positions[angles[:, 1]]
        v = positions[angles[:, 2]] - positions[angles[:, 1]]
        nu = np.sqrt(np.einsum("ij,ij->i", u, u))
        nv = np.sqrt(np.einsum("ij,ij->i", v, v))
        uh = u / nu[:, None]
        vh = v / nv[:, None]
        c = np.clip(np.einsum("ij,ij->i", uh, vh), -1.0, 1.0)
        theta = np.arccos(c)
        s = np.maximum(np.sqrt(1.0 - c * c), _MIN_SIN)
        dev = theta - angle_theta0
        pe += float(np.sum(0.5 * angle_k * dev * dev))
        coef = angle_k * dev / s
        fi = (coef / nu)[:, None] * (vh - c[:, None] * uh)
        fk = (coef / nv)[:, None] * (uh - c[:, None] * vh)
        np.add.at(out_forces, angles[:, 0], fi)
        np.add.at(out_forces, angles[:, 2], fk)
        np.add.at(out_forces, angles[:, 1], -(fi + fk))

    if len(pairs) and lj_epsilon > 0.0:
        d = positions[pairs[:, 0]] - positions[pairs[:, 1]]
        r2 = np.einsum("ij,ij->i", d, d)
        within = r2 < lj_cutoff * lj_cutoff
        if np.any(within):
            d = d[within]
            r2 = r2[within]
            sr2 = (lj_sigma * lj_sigma) / r2
            sr6 = sr2 * sr2 * sr2
            sr12 = sr6 * sr6
            src = (lj_sigma / lj_cutoff) ** 6
            shift = 4.0 * lj_epsilon * (src * src - src)
            pe += float(np.sum(4.0 * lj_epsilon * (sr12 - sr6) - shift))
            f = (24.0 * lj_epsilon * (2.0 * sr12 - sr6) / r2)[:, None] * d
            np.add.at(out_forces, pairs[within, 0], f)
            np.add.at(out_forces, pairs[within, 1], -f)

    for a, target, kg, fmax in zip(grab_atoms, grab_targets, grab_k, grab_fmax):
        delta = target - positions[a]
        dist = float(np.sqrt(delta @ delta))
        d_cap = fmax / kg
        if dist <= d_cap:
            out_forces[a] += kg * delta
            pe += 0.5 * kg * dist * dist
        else:
            out_forces[a] += (fmax / dist) * delta
            pe += fmax * (dist - 0.5 * d_cap)

    return pe, -1


def run_steps(
    positions,
    velocities,
    forces,
    masses,
    bonds,
    bond_r0,
    bond_k,
    angles,
    angle_theta0,
    angle_k,
    pairs,
    lj_epsilon,
    lj_sigma,
    lj_cutoff,
    grab_atoms,
    grab_targets,
    grab_k,
    grab_fmax,
    dt,
    n_steps,
    langevin,
    c1,
    noise_sigma,
    noise,
):
    """Advance n_steps in place (velocity Verlet, or BAOAB when langevin).

    Returns (final_pe, bad_bond_index, blowup_step) with -1 meaning clean.
    """
    inv_m = (1.0 / masses)[:, None]
    half_dt = 0.5 * dt
    pe = 0.0

    def refresh_forces():
        return compute_forces(
            positions, bonds, bond_r0, bond_k, angles, angle_theta0, angle_k,
            pairs, lj_epsilon, lj_sigma, lj_cutoff,
            grab_atoms, grab_targets, grab_k, grab_fmax, forces,
        )

    for step in range(n_steps):
        velocities += half_dt * inv_m * forces
        if langevin:
            positions += half_dt * velocities
            velocities *= c1
            velocities += noise_sigma[:, None] * noise[step]
            positions += half_dt * velocities
        else:
            positions += dt * velocities
        pe, bad = refresh_forces()
        if bad >= 0:
            return pe, bad, -1
        velocities += half_dt * inv_m * forces
        if not (np.isfinite(positions).all() and np.isfinite(velocities).all()):
            return pe, -1, step
    return pe, -1, -1
