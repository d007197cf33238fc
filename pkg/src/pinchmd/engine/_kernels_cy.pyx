# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled force and integrator kernels (hot path).

Same contract as _kernels_np.py; selected at import when available.
"""

from libc.math cimport sqrt, acos, isfinite

cdef double _MIN_BOND_R = 1e-12
cdef double _MIN_SIN = 1e-8


cdef int _forces(
    double[:, ::1] positions,
    int[:, ::1] bonds, double[::1] bond_r0, double[::1] bond_k,
    int[:, ::1] angles, double[::1] angle_theta0, double[::1] angle_k,
    int[:, ::1] pairs, double lj_epsilon, double lj_sigma, double lj_cutoff,
    int[::1] grab_atoms, double[:, ::1] grab_targets,
    double[::1] grab_k, double[::1] grab_fmax,
    double[:, ::1] out, double* pe_out,
) noexcept nogil:
    cdef Py_ssize_t n = positions.shape[0]
    cdef Py_ssize_t m, i, j, k, a
    cdef double dx, dy, dz, r, r2, stretch, coef, pe = 0.0
    cdef double ux, uy, uz, vx, vy, vz, nu, nv, c, s, theta, dev
    cdef double fix, fiy, fiz, fkx, fky, fkz
    cdef double sr2, sr6, sr12, src, shift, cutoff2
    cdef double dist, d_cap

    for i in range(n):
        out[i, 0] = 0.0
        out[i, 1] = 0.0
        out[i, 2] = 0.0

    for m in range(bonds.shape[0]):
        i = bonds[m, 0]
        j = bonds[m, 1]
        dx = positions[i, 0] - positions[j, 0]
        dy = positions[i, 1] - positions[j, 1]
        dz = positions[i, 2] - positions[j, 2]
        r = sqrt(dx * dx + dy * dy + dz * dz)
        if r < _MIN_BOND_R:
            pe_out[0] = 0.0
            return <int> m
        stretch = r - bond_r0[m]
        pe += 0.5 * bond_k[m] * stretch * stretch
        coef = -bond_k[m] * stretch / r
        out[i, 0] += coef * dx
        out[i, 1] += coef * dy
        out[i, 2] += coef * dz
        out[j, 0] -= coef * dx
        out[j, 1] -= coef * dy
        out[j, 2] -= coef * dz

    for m in range(angles.shape[0]):
        i = angles[m, 0]
        j = angles[m, 1]
        k = angles[m, 2]
        ux = positions[i, 0] - positions[j, 0]
        uy = positions[i, 1] - positions[j, 1]
        uz = positions[i, 2] - positions[j, 2]
        vx = positions[k, 0] - positions[j, 0]
        vy = positions[k, 1] - positions[j, 1]
        vz = positions[k, 2] - positions[j, 2]
        nu = sqrt(ux * ux + uy * uy + uz * uz)
        nv = sqrt(vx * vx + vy * vy + vz * vz)
        ux /= nu; uy /= nu; uz /= nu
        vx /= nv; vy /= nv; vz /= nv
        c = ux * vx + uy * vy + uz * vz
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        theta = acos(c)
        s = sqrt(1.0 - c * c)
        if s < _MIN_SIN:
            s = _MIN_SIN
        dev = theta - angle_theta0[m]
        pe += 0.5 * angle_k[m] * dev * dev
        coef = angle_k[m] * dev / s
        fix = (coef / nu) * (vx - c * ux)
        fiy = (coef / nu) * (vy - c * uy)
        fiz = (coef / nu) * (vz - c * uz)
        fkx = (coef / nv) * (ux - c * vx)
        fky = (coef / nv) * (uy - c * vy)
        fkz = (coef / nv) * (uz - c * vz)
        out[i, 0] += fix
        out[i, 1] += fiy
        out[i, 2] += fiz
        out[k, 0] += fkx
        out[k, 1] += fky
        out[k, 2] += fkz
        out[j, 0] -= fix + fkx
        out[j, 1] -= fiy + fky
        out[j, 2] -= fiz + fkz

    if lj_epsilon > 0.0:
        cutoff2 = lj_cutoff * lj_cutoff
        src = (lj_sigma / lj_cutoff) ** 6
        shift = 4.0 * lj_epsilon * (src * src - src)
        for m in range(pairs.shape[0]):
            i = pairs[m, 0]
            j = pairs[m, 1]
            dx = positions[i, 0] - positions[j, 0]
            dy = positions[i, 1] - positions[j, 1]
            dz = positions[i, 2] - positions[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < cutoff2:
                sr2 = lj_sigma * lj_sigma / r2
                sr6 = sr2 * sr2 * sr2
                sr12 = sr6 * sr6
                pe += 4.0 * lj_epsilon * (sr12 - sr6) - shift
                coef = 24.0 * lj_epsilon * (2.0 * sr12 - sr6) / r2
                out[i, 0] += coef * dx
                out[i, 1] += coef * dy
                out[i, 2] += coef * dz
                out[j, 0] -= coef * dx
                out[j, 1] -= coef * dy
                out[j, 2] -= coef * dz

    for m in range(grab_atoms.shape[0]):
        a = grab_atoms[m]
        dx = grab_targets[m, 0] - positions[a, 0]
        dy = grab_targets[m, 1] - positions[a, 1]
        dz = grab_targets[m, 2] - positions[a, 2]
        dist = sqrt(dx * dx + dy * dy + dz * dz)
        d_cap = grab_fmax[m] / grab_k[m]
        if dist <= d_cap:
            out[a, 0] += grab_k[m] * dx
            out[a, 1] += grab_k[m] * dy
            out[a, 2] += grab_k[m] * dz
            pe += 0.5 * grab_k[m] * dist * dist
        else:
            coef = grab_fmax[m] / dist
            out[a, 0] += coef * dx
            out[a, 1] += coef * dy
            out[a, 2] += coef * dz
            pe += grab_fmax[m] * (dist - 0.5 * d_cap)

    pe_out[0] = pe
    return -1


def compute_forces(
    double[:, ::1] positions,
    int[:, ::1] bonds, double[::1] bond_r0, double[::1] bond_k,
    int[:, ::1] angles, double[::1] angle_theta0, double[::1] angle_k,
    int[:, ::1] pairs, double lj_epsilon, double lj_sigma, double lj_cutoff,
    int[::1] grab_atoms, double[:, ::1] grab_targets,
    double[::1] grab_k, double[::1] grab_fmax,
    double[:, ::1] out_forces,
):
    cdef double pe = 0.0
    cdef int bad
    bad = _forces(
        positions, bonds, bond_r0, bond_k, angles, angle_theta0, angle_k,
        pairs, lj_epsilon, lj_sigma, lj_cutoff,
        grab_atoms, grab_targets, grab_k, grab_fmax, out_forces, &pe,
    )
    return pe, bad


def run_steps(
    double[:, ::1] positions,
    double[:, ::1] velocities,
    double[:, ::1] forces,
    double[::1] masses,
    int[:, ::1] bonds, double[::1] bond_r0, double[::1] bond_k,
    int[:, ::1] angles, double[::1] angle_theta0, double[::1] angle_k,
    int[:, ::1] pairs, double lj_epsilon, double lj_sigma, double lj_cutoff,
    int[::1] grab_atoms, double[:, ::1] grab_targets,
    double[::1] grab_k, double[::1] grab_fmax,
    double dt, Py_ssize_t n_steps, bint langevin, double c1,
    double[::1] noise_sigma, double[:, :, ::1] noise,
):
    cdef Py_ssize_t n = positions.shape[0]
    cdef Py_ssize_t step, i, ax
    cdef double half_dt = 0.5 * dt
    cdef double pe = 0.0
    cdef int bad = -1
    cdef Py_ssize_t blowup_step = -1
    cdef bint finite

    with nogil:
        for step in range(n_steps):
            for i in range(n):
                for ax in range(3):
                    velocities[i, ax] += half_dt * forces[i, ax] / masses[i]
            if langevin:
                for i in range(n):
                    for ax in range(3):
                        positions[i, ax] += half_dt * velocities[i, ax]
                        velocities[i, ax] = c1 * velocities[i, ax] + noise_sigma[i] * noise[step, i, ax]
                        positions[i, ax] += half_dt * velocities[i, ax]
            else:
                for i in range(n):
                    for ax in range(3):
                        positions[i, ax] += dt * velocities[i, ax]
            bad = _forces(
                positions, bonds, bond_r0, bond_k, angles, angle_theta0, angle_k,
                pairs, lj_epsilon, lj_sigma, lj_cutoff,
                grab_atoms, grab_targets, grab_k, grab_fmax, forces, &pe,
            )
            if bad >= 0:
                break
            finite = True
            for i in range(n):
                for ax in range(3):
                    velocities[i, ax] += half_dt * forces[i, ax] / masses[i]
                    if not (isfinite(positions[i, ax]) and isfinite(velocities[i, ax])):
                        finite = False
            if not finite:
                blowup_step = step
                break
    return pe, bad, blowup_step
