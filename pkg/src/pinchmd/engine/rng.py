"""Counter-based random numbers for reproducible Langevin dynamics.

Philox-4x32 with 10 rounds, keyed by the integrator seed; the counter block
for atom i at step s is (i, s_lo, s_hi, stream).  Noise therefore depends
only on (seed, step, atom), never on how many steps are advanced per call or
on thread count, so trajectories replay exactly.  One 128-bit block yields
the three Gaussian increments an atom needs per step via Box-Muller.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)

STREAM_THERMOSTAT = 0
STREAM_INIT_VELOCITIES = 1


def philox4x32(counter: np.ndarray, key: tuple[int, int]) -> np.ndarray:
    """Apply Philox-4x32-10 to an (m, 4) array of uint32 counter blocks."""
    c = np.asarray(counter, dtype=np.uint64)
    x0, x1, x2, x3 = c[:, 0].copy(), c[:, 1].copy(), c[:, 2].copy(), c[:, 3].copy()
    k0 = np.uint64(key[0]) & _MASK
    k1 = np.uint64(key[1]) & _MASK
    for _ in range(10):
        p0 = x0 * _M0
        p1 = x2 * _M1
        y0 = (p1 >> np.uint64(32)) ^ x1 ^ k0
        y1 = p1 & _MASK
        y2 = (p0 >> np.uint64(32)) ^ x3 ^ k1
        y3 = p0 & _MASK
        x0, x1, x2, x3 = y0, y1, y2, y3
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    out = np.empty((len(x0), 4), dtype=np.uint32)
    out[:, 0], out[:, 1], out[:, 2], out[:, 3] = x0, x1, x2, x3
    return out


def _split_seed(seed: int) -> tuple[int, int]:
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return s & 0xFFFFFFFF, s >> 32


def _to_normals(words: np.ndarray) -> np.ndarray:
    """Box-Muller: four 32-bit words -> three standard normals per row."""
    u = (words.astype(np.float64) + 0.5) * 2.0**-32
    r0 = np.sqrt(-2.0 * np.log(u[:, 0]))
    th0 = 2.0 * np.pi * u[:, 1]
    r1 = np.sqrt(-2.0 * np.log(u[:, 2]))
    th1 = 2.0 * np.pi * u[:, 3]
    out = np.empty((len(words), 3))
    out[:, 0] = r0 * np.cos(th0)
    out[:, 1] = r0 * np.sin(th0)
    out[:, 2] = r1 * np.cos(th1)
    return out


def normals_for_steps(
    seed: int, step0: int, n_steps: int, n_atoms: int, stream: int = STREAM_THERMOSTAT
) -> np.ndarray:
    """Standard normal increments, shape (n_steps, n_atoms, 3)."""
    steps = np.arange(step0, step0 + n_steps, dtype=np.uint64)
    counter = np.zeros((n_steps * n_atoms, 4), dtype=np.uint64)
    counter[:, 0] = np.tile(np.arange(n_atoms, dtype=np.uint64), n_steps)
    step_col = np.repeat(steps, n_atoms)
    counter[:, 1] = step_col & _MASK
    counter[:, 2] = step_col >> np.uint64(32)
    counter[:, 3] = np.uint64(stream)
    words = philox4x32(counter, _split_seed(seed))
    return _to_normals(words).reshape(n_steps, n_atoms, 3)


def maxwell_velocities(seed: int, n_atoms: int, masses: np.ndarray, temperature: float) -> np.ndarray:
    """Maxwell-Boltzmann velocity draw in reduced units (k_B = 1)."""
    z = normals_for_steps(seed, 0, 1, n_atoms, stream=STREAM_INIT_VELOCITIES)[0]
    return z * np.sqrt(temperature / np.asarray(masses, dtype=float))[:, None]
