"""Bead-spring polymer topology and its file formats.

Everything is in reduced units: sigma = epsilon = mass = k_B = 1.  The
default 50-bead chain stands in for a small protein: harmonic bonds and
angles plus a truncated-and-shifted Lennard-Jones excluded volume between
pairs more than two bonds apart.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"OMGV"
CHECKPOINT_VERSION = 1

DEFAULT_CHAIN_PARAMS = {
    "r0": 1.0,
    "k_b": 100.0,
    "theta0": math.pi * 5.0 / 6.0,
    "k_theta": 5.0,
    "epsilon": 1.0,
    "sigma": 1.0,
    "mass": 1.0,
}
DEFAULT_CUTOFF_SIGMA = 2.5
DEFAULT_CHAIN_LENGTH = 50


class TopologyError(Exception):
    pass


@dataclass
class Topology:
    masses: np.ndarray  # (n,)
    bonds: np.ndarray  # (nb, 2) int32
    bond_r0: np.ndarray  # (nb,)
    bond_k: np.ndarray  # (nb,)
    angles: np.ndarray  # (na, 3) int32, middle vertex is the hinge
    angle_theta0: np.ndarray  # (na,)
    angle_k: np.ndarray  # (na,)
    lj_epsilon: float
    lj_sigma: float
    lj_cutoff: float
    exclusions: frozenset[tuple[int, int]]  # 1-2 and 1-3 pairs, i < j
    pairs: np.ndarray = field(init=False)  # (np, 2) int32, non-excluded i < j

    def __post_init__(self):
        self.masses = np.asarray(self.masses, dtype=float)
        self.bonds = np.asarray(self.bonds, dtype=np.int32).reshape(-1, 2)
        self.bond_r0 = np.asarray(self.bond_r0, dtype=float)
        self.bond_k = np.asarray(self.bond_k, dtype=float)
        self.angles = np.asarray(self.angles, dtype=np.int32).reshape(-1, 3)
        self.angle_theta0 = np.asarray(self.angle_theta0, dtype=float)
        self.angle_k = np.asarray(self.angle_k, dtype=float)
        self._validate()
        n = self.n_atoms
        pair_list = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if (i, j) not in self.exclusions
        ]
        self.pairs = np.array(pair_list, dtype=np.int32).reshape(-1, 2)

    def _validate(self):
        n = self.n_atoms
        if n < 1 or np.any(self.masses <= 0):
            raise TopologyError("need at least one atom with positive mass")
        for i, j in self.bonds:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise TopologyError(f"bad bond ({i},{j})")
        if np.any(self.bond_r0 <= 0) or np.any(self.bond_k < 0):
            raise TopologyError("bond parameters out of range")
        for i, j, k in self.angles:
            if len({int(i), int(j), int(k)}) != 3 or not all(0 <= v < n for v in (i, j, k)):
                raise TopologyError(f"bad angle ({i},{j},{k})")
        if np.any(self.angle_k < 0):
            raise TopologyError("angle stiffness must be non-negative")
        if self.lj_sigma <= 0 or self.lj_epsilon < 0 or self.lj_cutoff < self.lj_sigma:
            raise TopologyError("LJ parameters out of range")
        for i, j in self.exclusions:
            if not (0 <= i < j < n):
                raise TopologyError(f"bad exclusion ({i},{j})")

    @property
    def n_atoms(self) -> int:
        return len(self.masses)


def build_chain(n: int, params: dict | None = None) -> Topology:
    """Linear chain: bonds (i,i+1), angles (i,i+1,i+2), 1-2/1-3 exclusions."""
    if n < 2:
        raise TopologyError(f"a chain needs at least 2 beads, got {n}")
    p = dict(DEFAULT_CHAIN_PARAMS)
    if params:
        p.update(params)
    bonds = [(i, i + 1) for i in range(n - 1)]
    angles = [(i, i + 1, i + 2) for i in range(n - 2)]
    exclusions = {(i, i + 1) for i in range(n - 1)} | {(i, i + 2) for i in range(n - 2)}
    return Topology(
        masses=np.full(n, p["mass"]),
        bonds=np.array(bonds),
        bond_r0=np.full(len(bonds), p["r0"]),
        bond_k=np.full(len(bonds), p["k_b"]),
        angles=np.array(angles) if angles else np.empty((0, 3)),
        angle_theta0=np.full(len(angles), p["theta0"]),
        angle_k=np.full(len(angles), p["k_theta"]),
        lj_epsilon=p["epsilon"],
        lj_sigma=p["sigma"],
        lj_cutoff=DEFAULT_CUTOFF_SIGMA * p["sigma"],
        exclusions=frozenset(exclusions),
    )


def zigzag_positions(n: int, r0: float = 1.0, theta0: float = math.pi * 5.0 / 6.0) -> np.ndarray:
    """Planar zigzag with every bond at r0 and every angle at theta0.

    This is the strain-free rest configuration of the default chain, which
    makes it the deterministic starting point for simulations.
    """
    half = 0.5 * (math.pi - theta0)
    pos = np.zeros((n, 3))
    for i in range(1, n):
        sign = 1.0 if (i - 1) % 2 == 0 else -1.0
        step = np.array([math.cos(half), sign * math.sin(half), 0.0]) * r0
        pos[i] = pos[i - 1] + step
    return pos


# --- topology file --------------------------------------------------------
#
# Sections: [atoms] index mass / [bonds] i j r0 k / [angles] i j k theta0
# ktheta / [lj] epsilon sigma cutoff.  Whitespace separated, '#' comments.


def save_topology(top: Topology, path: str | Path) -> None:
    lines = ["[atoms]"]
    for i, m in enumerate(top.masses):
        lines.append(f"{i} {float(m)!r}")
    lines.append("[bonds]")
    for (i, j), r0, k in zip(top.bonds, top.bond_r0, top.bond_k):
        lines.append(f"{i} {j} {float(r0)!r} {float(k)!r}")
    lines.append("[angles]")
    for (i, j, k), t0, kt in zip(top.angles, top.angle_theta0, top.angle_k):
        lines.append(f"{i} {j} {k} {float(t0)!r} {float(kt)!r}")
    lines.append("[lj]")
    lines.append(f"{float(top.lj_epsilon)!r} {float(top.lj_sigma)!r} {float(top.lj_cutoff)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _chain_exclusions(bonds: np.ndarray, n: int) -> frozenset[tuple[int, int]]:
    adjacency: dict[int, set[int]] = {i: set() for i in range(n)}
    for i, j in bonds:
        adjacency[int(i)].add(int(j))
        adjacency[int(j)].add(int(i))
    excl: set[tuple[int, int]] = set()
    for i, j in bonds:
        excl.add((min(int(i), int(j)), max(int(i), int(j))))
    for j, neighbors in adjacency.items():
        for a in neighbors:
            for b in neighbors:
                if a < b:
                    excl.add((a, b))
    return frozenset(excl)


def load_topology(path: str | Path) -> Topology:
    section = None
    atoms: list[tuple[int, float]] = []
    bonds: list[tuple[int, int, float, float]] = []
    angles: list[tuple[int, int, int, float, float]] = []
    lj: tuple[float, float, float] | None = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            section = line.strip("[]").lower()
            continue
        parts = line.split()
        try:
            if section == "atoms":
                atoms.append((int(parts[0]), float(parts[1])))
            elif section == "bonds":
                bonds.append((int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])))
            elif section == "angles":
                angles.append(
                    (int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3]), float(parts[4]))
                )
            elif section == "lj":
                lj = (float(parts[0]), float(parts[1]), float(parts[2]))
            else:
                raise TopologyError(f"{path}:{lineno}: data before a section header")
        except (ValueError, IndexError) as exc:
            raise TopologyError(f"{path}:{lineno}: {exc}") from exc
    if not atoms or lj is None:
        raise TopologyError(f"{path}: missing [atoms] or [lj] section")
    atoms.sort()
    if [i for i, _ in atoms] != list(range(len(atoms))):
        raise TopologyError(f"{path}: atom indices must be 0..n-1")
    bond_arr = np.array([(i, j) for i, j, _, _ in bonds], dtype=np.int32).reshape(-1, 2)
    return Topology(
        masses=np.array([m for _, m in atoms]),
        bonds=bond_arr,
        bond_r0=np.array([r for _, _, r, _ in bonds]),
        bond_k=np.array([k for _, _, _, k in bonds]),
        angles=np.array([(i, j, k) for i, j, k, _, _ in angles], dtype=np.int32).reshape(-1, 3),
        angle_theta0=np.array([t for _, _, _, t, _ in angles]),
        angle_k=np.array([k for _, _, _, _, k in angles]),
        lj_epsilon=lj[0],
        lj_sigma=lj[1],
        lj_cutoff=lj[2],
        exclusions=_chain_exclusions(bond_arr, len(atoms)),
    )


# --- checkpoint file ------------------------------------------------------
#
# Binary, little-endian: magic "OMGV", version u32, n_atoms u32, step u64,
# time f64, positions then velocities as f64 triples.


class CheckpointError(Exception):
    pass


def checkpoint_bytes(positions: np.ndarray, velocities: np.ndarray, step: int, time: float) -> bytes:
    positions = np.ascontiguousarray(positions, dtype="<f8")
    velocities = np.ascontiguousarray(velocities, dtype="<f8")
    n = len(positions)
    header = CHECKPOINT_MAGIC + struct.pack("<IIQd", CHECKPOINT_VERSION, n, step, time)
    return header + positions.tobytes() + velocities.tobytes()


def parse_checkpoint(data: bytes) -> tuple[np.ndarray, np.ndarray, int, float]:
    head = struct.calcsize("<IIQd")
    if len(data) < 4 + head or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, n, step, time = struct.unpack_from("<IIQd", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    body = data[4 + head:]
    expected = 2 * n * 3 * 8
    if len(body) != expected:
        raise CheckpointError(f"truncated checkpoint: {len(body)} body bytes, expected {expected}")
    floats = np.frombuffer(body, dtype="<f8")
    positions = floats[: 3 * n].reshape(n, 3).astype(float)
    velocities = floats[3 * n:].reshape(n, 3).astype(float)
    return positions, velocities, step, time


def save_checkpoint(path: str | Path, positions, velocities, step: int, time: float) -> None:
    Path(path).write_bytes(checkpoint_bytes(positions, velocities, step, time))


def load_checkpoint(path: str | Path) -> tuple[np.ndarray, np.ndarray, int, float]:
    return parse_checkpoint(Path(path).read_bytes())
