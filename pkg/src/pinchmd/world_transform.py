"""Two-hand scale/rotate of the simulation-to-world mapping.

A transform session captures both pinch points and the current mapping at the
moment the gesture begins.  Every update solves for the unique zero-roll
similarity that keeps the two captured anchor points glued to the hands: the
midpoint follows the hands, the scale follows their separation, and the
rotation is the shortest arc between the old and new inter-hand axes.  Two
points leave roll about the inter-hand axis undetermined; choosing the
minimal rotation makes updates deterministic.

The incremental transform is always composed against the session-start
mapping, never the previous frame, so per-frame error cannot accumulate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Similarity, Vec3, quat_rotate, shortest_arc

DEFAULT_MIN_SEPARATION_M = 1e-3  # well below measured pinch localization noise


class HandsCoincidentError(Exception):
    def __init__(self, separation: float, minimum: float):
        self.separation = separation
        super().__init__(
            f"pinch points are {separation:.2e} m apart; need at least {minimum:.2e} m"
        )


@dataclass
class TransformSession:
    a0: Vec3  # left pinch point at begin, world
    b0: Vec3  # right pinch point at begin, world
    t0: Similarity  # simulation->world mapping at begin
    min_separation: float = DEFAULT_MIN_SEPARATION_M
    degraded: bool = False  # an update saw coincident hands and was skipped
    last: Similarity = field(init=False)

    def __post_init__(self):
        self.a0 = np.asarray(self.a0, dtype=float)
        self.b0 = np.asarray(self.b0, dtype=float)
        self.last = self.t0


def transform_begin(
    a0: Vec3,
    b0: Vec3,
    t: Similarity,
    min_separation: float = DEFAULT_MIN_SEPARATION_M,
) -> TransformSession:
    """Open a session; raises HandsCoincidentError below the separation floor."""
    sep = float(np.linalg.norm(np.asarray(b0, float) - np.asarray(a0, float)))
    if sep < min_separation:
        raise HandsCoincidentError(sep, min_separation)
    return TransformSession(a0, b0, t, min_separation)


def transform_update(session: TransformSession, a: Vec3, b: Vec3) -> Similarity:
    """Mapping that carries the session's anchor points to hand points a, b.

    With midpoints m0, m, axes d0 = b0-a0, d = b-a, scale s = |d|/|d0| and
    R the shortest arc from d0-hat to d-hat, the incremental transform is
    G(x) = R(s(x - m0)) + m, and the result is G composed with the mapping
    captured at session begin.  If the hands are closer than the separation
    floor the previous result is returned unchanged and the session is
    flagged degraded.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    sep = float(np.linalg.norm(d))
    if sep < session.min_separation:
        session.degraded = True
        return session.last

    d0 = session.b0 - session.a0
    sep0 = float(np.linalg.norm(d0))
    m0 = 0.5 * (session.a0 + session.b0)
    m = 0.5 * (a + b)
    scale = sep / sep0
    rot = shortest_arc(d0 / sep0, d / sep)
    incremental = Similarity(
        scale=scale,
        rotation=rot,
        translation=m - quat_rotate(rot, scale * m0),
    )
    result = incremental.compose(session.t0)
    session.last = result
    return result
