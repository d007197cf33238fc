"""Pinch-point localization and offset calibration.

A pinch happens at a roughly fixed spot relative to the back-of-hand tracker,
so a single per-hand offset (expressed in the tracker-local frame, origin at
the center of the tracker's flat side) maps any tracker pose to a world-space
pinch point.  Calibration estimates that offset as the centroid of recorded
pinch samples and reports the per-axis sample standard deviation as spread.

Note on terminology: the measured spreads are reported in meters with a +/-
sign convention, which dimensionally is a standard deviation, and that is
what ``calibrate`` computes (divisor n-1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Pose, Vec3

MAX_PINCH_RADIUS_M = 0.30  # anatomical sanity bound: a pinch stays near the hand


class HandSide(enum.Enum):
    LEFT = "L"
    RIGHT = "R"

    @staticmethod
    def parse(text: str) -> "HandSide":
        t = text.strip().upper()
        if t in ("L", "LEFT"):
            return HandSide.LEFT
        if t in ("R", "RIGHT"):
            return HandSide.RIGHT
        raise ValueError(f"unknown hand {text!r} (expected L or R)")


class CalibrationError(Exception):
    """Calibration cannot proceed (insufficient or invalid data)."""


class RejectedSampleError(CalibrationError):
    """A sample violates the pinch-radius sanity bound."""

    def __init__(self, index: int, norm: float):
        self.index = index
        super().__init__(
            f"sample {index} is {norm:.3f} m from the tracker origin "
            f"(limit {MAX_PINCH_RADIUS_M} m)"
        )


@dataclass
class PinchOffset:
    """Fixed tracker-frame offset of the pinch point for one hand."""

    hand: HandSide
    offset: Vec3

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float)
        if self.offset.shape != (3,) or not np.all(np.isfinite(self.offset)):
            raise ValueError("pinch offset must be a finite 3-vector")
        n = float(np.linalg.norm(self.offset))
        if n >= MAX_PINCH_RADIUS_M:
            raise ValueError(f"pinch offset {n:.3f} m exceeds {MAX_PINCH_RADIUS_M} m bound")


def zero_offset(hand: HandSide) -> PinchOffset:
    """Default offset (tracker origin) used until a calibration is loaded."""
    return PinchOffset(hand, np.zeros(3))


@dataclass
class PinchSampleSet:
    """Recorded tracker-frame pinch positions for one hand."""

    hand: HandSide
    samples: np.ndarray  # (n, 3) meters
    subject_ids: list[str] | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 3)
        if self.subject_ids is not None and len(self.subject_ids) != len(self.samples):
            raise ValueError("subject_ids must parallel samples")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class CalibrationResult:
    hand: HandSide
    centroid: Vec3  # tracker frame, meters
    spread: Vec3  # per-axis sample standard deviation, meters
    n: int

    def offset(self) -> PinchOffset:
        return PinchOffset(self.hand, self.centroid)


def pinch_point(pose: Pose, offset: PinchOffset) -> Vec3:
    """World-space pinch point of a tracker pose and its hand offset."""
    return pose.transform_point(offset.offset)


def to_tracker_frame(world_point: Vec3, pose: Pose) -> Vec3:
    """Express a world point in the tracker-local frame; inverse of pinch_point."""
    return pose.inverse_transform_point(world_point)


def calibrate(samples: PinchSampleSet) -> CalibrationResult:
    """Centroid and per-axis sample standard deviation of pinch samples.

    Raises CalibrationError with fewer than 2 samples and RejectedSampleError
    (naming the index) if any sample lies beyond the pinch-radius bound.
    """
    pts = samples.samples
    if len(pts) < 2:
        raise CalibrationError(
            f"need at least 2 samples to calibrate, got {len(pts)}"
        )
    norms = np.linalg.norm(pts, axis=1)
    bad = np.nonzero(norms >= MAX_PINCH_RADIUS_M)[0]
    if bad.size:
        raise RejectedSampleError(int(bad[0]), float(norms[bad[0]]))
    centroid = pts.mean(axis=0)
    spread = pts.std(axis=0, ddof=1)
    return CalibrationResult(samples.hand, centroid, spread, len(pts))


# --- file formats ---------------------------------------------------------
#
# Sample file: one sample per line, "hand,subject_id,x,y,z" (meters, hand L/R),
# '#' starts a comment.  Result file: key-value text, one block per hand.


def load_sample_file(path: str | Path) -> dict[HandSide, PinchSampleSet]:
    rows: dict[HandSide, list[tuple[str, list[float]]]] = {h: [] for h in HandSide}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5:
            raise CalibrationError(f"{path}:{lineno}: expected hand,subject_id,x,y,z")
        try:
            hand = HandSide.parse(parts[0])
            xyz = [float(p) for p in parts[2:5]]
        except ValueError as exc:
            raise CalibrationError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in xyz):
            raise CalibrationError(f"{path}:{lineno}: non-finite coordinate")
        rows[hand].append((parts[1], xyz))
    out: dict[HandSide, PinchSampleSet] = {}
    for hand, entries in rows.items():
        if entries:
            out[hand] = PinchSampleSet(
                hand,
                np.array([xyz for _, xyz in entries]),
                subject_ids=[sid for sid, _ in entries],
            )
    return out


def format_result(result: CalibrationResult) -> str:
    c, s = result.centroid, result.spread
    return (
        f"hand {result.hand.value}\n"
        f"n {result.n}\n"
        f"centroid_xyz {c[0]:.6g} {c[1]:.6g} {c[2]:.6g}\n"
        f"spread_xyz {s[0]:.6g} {s[1]:.6g} {s[2]:.6g}\n"
    )


def save_results(results: Sequence[CalibrationResult], path: str | Path) -> None:
    Path(path).write_text("\n".join(format_result(r) for r in results))


def load_results(path: str | Path) -> dict[HandSide, CalibrationResult]:
    out: dict[HandSide, CalibrationResult] = {}
    block: dict[str, list[str]] = {}

    def flush():
        if not block:
            return
        try:
            hand = HandSide.parse(block["hand"][0])
            n = int(block["n"][0])
            centroid = np.array([float(v) for v in block["centroid_xyz"]])
            spread = np.array([float(v) for v in block["spread_xyz"]])
        except (KeyError, ValueError, IndexError) as exc:
            raise CalibrationError(f"{path}: malformed calibration block: {exc}") from exc
        out[hand] = CalibrationResult(hand, centroid, spread, n)
        block.clear()

    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            flush()
            continue
        key, *vals = line.split()
        if key == "hand" and "hand" in block:
            flush()
        block[key] = vals
    flush()
    return out
