"""Molecular dynamics state and integration on top of the kernel backends.

Velocity Verlet for NVE, BAOAB splitting for Langevin.  Thermostat noise is
keyed on (seed, step, atom), so advancing 1000 steps in one call or in ten
calls of 100 produces the same trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from ..geometry import Similarity, Vec3
from . import rng
from .backend import kernels
from .topology import Topology

DEFAULT_GRAB_STIFFNESS = 20.0
DEFAULT_GRAB_FMAX = 20.0


class SingularGeometryError(Exception):
    """Two bonded atoms coincide, so the bond force is undefined."""

    def __init__(self, pair: tuple[int, int]):
        self.pair = pair
        super().__init__(f"bonded atoms {pair[0]} and {pair[1]} coincide")


class SimulationBlowupError(Exception):
    """Integration produced a non-finite position or velocity."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite state at step {step}")


@dataclass
class GrabForce:
    """Capped spring pulling one atom toward a simulation-space target."""

    atom: int
    target: Vec3
    stiffness: float = DEFAULT_GRAB_STIFFNESS
    f_max: float = DEFAULT_GRAB_FMAX

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        if self.stiffness <= 0 or self.f_max <= 0:
            raise ValueError("grab stiffness and force cap must be positive")


@dataclass
class IntegratorConfig:
    dt: float
    thermostat: Literal["nve", "langevin"] = "nve"
    temperature: float = 0.0
    friction: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.temperature < 0 or self.friction < 0:
            raise ValueError("temperature and friction must be non-negative")
        if self.thermostat not in ("nve", "langevin"):
            raise ValueError(f"unknown thermostat {self.thermostat!r}")


@dataclass
class SimState:
    positions: np.ndarray  # (n, 3)
    velocities: np.ndarray  # (n, 3)
    forces: np.ndarray  # (n, 3)
    potential_energy: float
    kinetic_energy: float
    time: float = 0.0
    step: int = 0

    def copy(self) -> "SimState":
        return replace(
            self,
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            forces=self.forces.copy(),
        )


def _grab_arrays(grabs: Sequence[GrabForce], n_atoms: int):
    atoms = np.array([g.atom for g in grabs], dtype=np.int32)
    if atoms.size and (atoms.min() < 0 or atoms.max() >= n_atoms):
        raise ValueError("grab atom index out of range")
    targets = (
        np.array([g.target for g in grabs], dtype=float).reshape(-1, 3)
        if grabs
        else np.empty((0, 3))
    )
    k = np.array([g.stiffness for g in grabs], dtype=float)
    fmax = np.array([g.f_max for g in grabs], dtype=float)
    return atoms, targets, k, fmax


def compute_forces(
    top: Topology, positions: np.ndarray, grabs: Sequence[GrabForce] = ()
) -> tuple[np.ndarray, float]:
    """Forces (-grad U) and potential energy for a configuration."""
    positions = np.ascontiguousarray(positions, dtype=float)
    out = np.zeros_like(positions)
    atoms, targets, gk, gf = _grab_arrays(grabs, top.n_atoms)
    pe, bad = kernels.compute_forces(
        positions, top.bonds, top.bond_r0, top.bond_k,
        top.angles, top.angle_theta0, top.angle_k,
        top.pairs, top.lj_epsilon, top.lj_sigma, top.lj_cutoff,
        atoms, targets, gk, gf, out,
    )
    if bad >= 0:
        raise SingularGeometryError((int(top.bonds[bad, 0]), int(top.bonds[bad, 1])))
    return out, pe


def kinetic_energy(masses: np.ndarray, velocities: np.ndarray) -> float:
    return float(0.5 * np.sum(masses[:, None] * velocities * velocities))


def initial_state(
    top: Topology,
    positions: np.ndarray,
    velocities: np.ndarray | None = None,
    grabs: Sequence[GrabForce] = (),
) -> SimState:
    positions = np.array(positions, dtype=float).reshape(top.n_atoms, 3)
    if velocities is None:
        velocities = np.zeros_like(positions)
    velocities = np.array(velocities, dtype=float).reshape(top.n_atoms, 3)
    forces, pe = compute_forces(top, positions, grabs)
    return SimState(
        positions=positions,
        velocities=velocities,
        forces=forces,
        potential_energy=pe,
        kinetic_energy=kinetic_energy(top.masses, velocities),
    )


# Langevin noise is generated in blocks to bound memory on long advances.
_NOISE_BLOCK_TARGET = 1 << 19  # floats per block


def advance(
    state: SimState,
    top: Topology,
    grabs: Sequence[GrabForce],
    cfg: IntegratorConfig,
    n_steps: int,
) -> SimState:
    """Advance n_steps and return a fresh state; the input is untouched.

    Raises SimulationBlowupError (carrying the absolute step index) if the
    integration goes non-finite, and SingularGeometryError if bonded atoms
    coincide.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    positions = np.ascontiguousarray(state.positions, dtype=float).copy()
    velocities = np.ascontiguousarray(state.velocities, dtype=float).copy()
    if state.step == 0:
        forces, _ = compute_forces(top, positions, grabs)
    else:
        forces = np.ascontiguousarray(state.forces, dtype=float).copy()
    atoms, targets, gk, gf = _grab_arrays(grabs, top.n_atoms)

    langevin = cfg.thermostat == "langevin"
    c1 = math.exp(-cfg.friction * cfg.dt) if langevin else 1.0
    noise_sigma = (
        np.sqrt(cfg.temperature * (1.0 - c1 * c1) / top.masses) if langevin else None
    )

    pe = state.potential_energy
    done = 0
    block = max(1, _NOISE_BLOCK_TARGET // (3 * top.n_atoms)) if langevin else n_steps
    while done < n_steps:
        todo = min(block, n_steps - done)
        if todo == 0:
            break
        noise = (
            rng.normals_for_steps(cfg.rng_seed, state.step + done, todo, top.n_atoms)
            if langevin
            else None
        )
        pe, bad, blowup = kernels.run_steps(
            positions, velocities, forces, top.masses,
            top.bonds, top.bond_r0, top.bond_k,
            top.angles, top.angle_theta0, top.angle_k,
            top.pairs, top.lj_epsilon, top.lj_sigma, top.lj_cutoff,
            atoms, targets, gk, gf,
            cfg.dt, todo, langevin, c1, noise_sigma, noise,
        )
        if bad >= 0:
            raise SingularGeometryError((int(top.bonds[bad, 0]), int(top.bonds[bad, 1])))
        if blowup >= 0:
            raise SimulationBlowupError(state.step + done + blowup)
        done += todo

    return SimState(
        positions=positions,
        velocities=velocities,
        forces=forces,
        potential_energy=pe if n_steps else state.potential_energy,
        kinetic_energy=kinetic_energy(top.masses, velocities),
        time=state.time + n_steps * cfg.dt,
        step=state.step + n_steps,
    )


def step_vv(
    state: SimState, top: Topology, grabs: Sequence[GrabForce], cfg: IntegratorConfig
) -> SimState:
    """Single integrator step (velocity Verlet, or BAOAB under Langevin)."""
    return advance(state, top, grabs, cfg, 1)


def nearest_atom(positions: np.ndarray, p: Vec3) -> int:
    """Index of the atom closest to p; ties resolve to the lowest index."""
    positions = np.asarray(positions, dtype=float)
    if len(positions) == 0:
        raise ValueError("need at least one atom")
    d = positions - np.asarray(p, dtype=float)
    return int(np.argmin(np.einsum("ij,ij->i", d, d)))


def world_to_sim(p_world: Vec3, transform: Similarity) -> Vec3:
    """Map a world point into simulation space through the view transform."""
    return transform.inverse().apply(p_world)


def sim_to_world(p_sim: Vec3, transform: Similarity) -> Vec3:
    return transform.apply(p_sim)
