"""Algorithmic knot detection for bead chains.

Pipeline: close the open chain into a polygon (radial closure), simplify it
with triangle moves that provably preserve knot type (Koniaris-Muthukumar-
Taylor reduction), extract a crossing diagram from a generic projection, and
evaluate the Alexander determinant |Delta(-1)| from the underpass
presentation.  The determinant is 1 for the unknot, 3 for the trefoil and 5
for the figure-eight, which is exactly the resolution the knotting task
needs.  All choices (projection directions, perturbations, vertex scan
order) are deterministic so classifications are reproducible.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine.rng import philox4x32

EPS_GEOM = 1e-12  # exact-predicate epsilon for the triangle tests
EPS_VERTEX = 1e-9  # consecutive-vertex distinctness / touch tolerance
EPS_GENERIC = 1e-9  # projection genericity margin
DEFAULT_CLOSURE_FACTOR = 10.0
# fixed fallback direction for a terminus sitting on the centroid
DEGENERATE_CLOSURE_DIR = np.array([1.0, 0.0, 0.0])


class ProjectionFailureError(Exception):
    """No direction in the deterministic list gave a generic projection."""


class _NotGeneric(Exception):
    pass


class KnotClass(enum.Enum):
    UNKNOT = "unknot"
    TREFOIL = "trefoil"
    OTHER = "other"


@dataclass(frozen=True)
class KnotReport:
    determinant: int
    crossings_after_reduction: int
    classification: KnotClass
    note: str = ""


@dataclass
class ClosedPolygon:
    """Closed loop of 3D vertices; the last vertex connects back to the first."""

    vertices: np.ndarray
    note: str = ""

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        n = len(self.vertices)
        if n < 3:
            raise ValueError(f"a closed polygon needs at least 3 vertices, got {n}")
        gaps = np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)
        if np.any(gaps <= EPS_VERTEX):
            raise ValueError("consecutive polygon vertices must be distinct")

    def __len__(self) -> int:
        return len(self.vertices)


def radius_of_gyration(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    return float(np.sqrt(np.mean(np.sum((points - points.mean(axis=0)) ** 2, axis=1))))


def close_chain(positions: np.ndarray, extension_factor: float = DEFAULT_CLOSURE_FACTOR) -> ClosedPolygon:
    """Close an open chain by extending both termini radially outward.

    Each end is pushed away from the chain centroid by extension_factor
    times the radius of gyration; the two far points are then joined by a
    single segment.  Far from the chain body, this cannot alter which knot
    the chain forms.  A terminus sitting exactly on the centroid (fully
    collinear chain) is sent along a fixed +x direction instead, and the
    polygon carries a note saying so.
    """
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise ValueError("need at least 3 beads to close a chain")
    centroid = pts.mean(axis=0)
    rg = radius_of_gyration(pts)
    reach = max(extension_factor * rg, 1.0)
    note = ""

    def extend(end: np.ndarray) -> np.ndarray:
        nonlocal note
        v = end - centroid
        norm = np.linalg.norm(v)
        if norm < EPS_VERTEX:
            note = "degenerate closure: terminus on centroid, used fixed +x offset"
            v = DEGENERATE_CLOSURE_DIR
            norm = 1.0
        return end + (reach / norm) * v

    far_last = extend(pts[-1])
    far_first = extend(pts[0])
    if np.linalg.norm(far_last - far_first) <= EPS_VERTEX:
        far_first = far_first + np.array([0.0, 2.0 * EPS_VERTEX + 1e-6, 0.0])
        note = "degenerate closure: far points coincided, nudged one by +y"
    return ClosedPolygon(np.vstack([pts, far_last, far_first]), note=note)


# --- KMT reduction --------------------------------------------------------


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.eye(3)[int(np.argmin(np.abs(normal)))]
    e1 = np.cross(normal, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(normal, e1)


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _clip_segment_to_triangle_2d(q0, q1, tri) -> tuple[float, float] | None:
    """Parameter interval of segment q0->q1 inside a 2D triangle, or None."""
    area = _cross2(tri[1] - tri[0], tri[2] - tri[0])
    if abs(area) < EPS_GEOM:
        return None  # degenerate triangle clips nothing
    orient = 1.0 if area > 0 else -1.0
    t0, t1 = 0.0, 1.0
    d = q1 - q0
    for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
        edge = b - a
        # inside is the left side for ccw orientation
        num = orient * _cross2(edge, q0 - a)
        den = -orient * _cross2(edge, d)
        if abs(den) < EPS_GEOM:
            if num < -EPS_GEOM:
                return None  # parallel and outside
            continue
        t = num / den
        if den > 0:
            t1 = min(t1, t)
        else:
            t0 = max(t0, t)
        if t0 > t1:
            return None
    return (t0, t1)


def _segment_blocks_triangle(s0, s1, tri_a, tri_b, tri_c, shared: np.ndarray | None) -> bool:
    """Does segment s0-s1 intersect triangle (a,b,c) beyond a shared vertex?"""
    n = np.cross(tri_b - tri_a, tri_c - tri_a)
    n_len = np.linalg.norm(n)
    if n_len < EPS_GEOM:
        return False  # degenerate triangles are handled by the caller
    n = n / n_len
    d0 = float(np.dot(s0 - tri_a, n))
    d1 = float(np.dot(s1 - tri_a, n))
    if d0 > EPS_GEOM and d1 > EPS_GEOM:
        return False
    if d0 < -EPS_GEOM and d1 < -EPS_GEOM:
        return False

    e1, e2 = _plane_basis(n)

    def flat(p):
        return np.array([np.dot(p - tri_a, e1), np.dot(p - tri_a, e2)])

    tri2 = [flat(tri_a), flat(tri_b), flat(tri_c)]

    if abs(d0) <= EPS_GEOM and abs(d1) <= EPS_GEOM:
        # coplanar: clip in 2D and look for overlap away from the shared vertex
        interval = _clip_segment_to_triangle_2d(flat(s0), flat(s1), tri2)
        if interval is None:
            return False
        t0, t1 = interval
        seg_len = float(np.linalg.norm(s1 - s0))
        if (t1 - t0) * seg_len <= EPS_VERTEX:
            # grazing contact at a point
            if shared is None:
                return True
            mid = s0 + 0.5 * (t0 + t1) * (s1 - s0)
            return bool(np.linalg.norm(mid - shared) > EPS_VERTEX)
        if shared is None:
            return True
        shared_t = 0.0 if np.linalg.norm(s0 - shared) <= EPS_VERTEX else 1.0
        if shared_t == 0.0:
            return t1 * seg_len > EPS_VERTEX
        return (1.0 - t0) * seg_len > EPS_VERTEX

    # proper plane crossing (or endpoint touching the plane)
    t = d0 / (d0 - d1)
    t = min(1.0, max(0.0, t))
    p = s0 + t * (s1 - s0)
    p2 = flat(p)
    # barycentric containment with tolerance
    v0 = tri2[1] - tri2[0]
    v1 = tri2[2] - tri2[0]
    v2 = p2 - tri2[0]
    den = v0[0] * v1[1] - v1[0] * v0[1]
    b1 = (v2[0] * v1[1] - v1[0] * v2[1]) / den
    b2 = (v0[0] * v2[1] - v2[0] * v0[1]) / den
    scale = math.sqrt(abs(den))
    tol = EPS_VERTEX / max(scale, EPS_VERTEX)
    if b1 < -tol or b2 < -tol or b1 + b2 > 1.0 + tol:
        return False
    if shared is not None and np.linalg.norm(p - shared) <= EPS_VERTEX:
        return False
    return True


def _vertex_removable(pts: list[np.ndarray], i: int) -> bool:
    n = len(pts)
    a = pts[(i - 1) % n]
    b = pts[i]
    c = pts[(i + 1) % n]
    if np.linalg.norm(a - c) <= EPS_VERTEX:
        return False  # removal would merge two distinct neighbors
    area2 = np.linalg.norm(np.cross(b - a, c - b))
    if area2 < EPS_GEOM:
        # collinear: removal is a pure shortcut only if b lies between a and c
        ab = np.linalg.norm(b - a)
        bc = np.linalg.norm(c - b)
        ac = np.linalg.norm(c - a)
        return abs(ab + bc - ac) <= EPS_VERTEX

    im1 = (i - 1) % n
    ip1 = (i + 1) % n
    for j in range(n):
        if j == im1 or j == i:
            continue  # the two edges forming the triangle
        j_next = (j + 1) % n
        shared = None
        if j_next == im1:
            shared = a
        elif j == ip1:
            shared = c
        if _segment_blocks_triangle(pts[j], pts[j_next], a, b, c, shared):
            return False
    return True


def kmt_simplify(poly: ClosedPolygon) -> ClosedPolygon:
    """Iteratively delete vertices whose spanning triangle nothing crosses.

    Deterministic ascending scan, repeated to a fixed point; the knot type
    is preserved by construction of the triangle test.
    """
    pts = [v.copy() for v in poly.vertices]
    changed = True
    while changed and len(pts) > 3:
        changed = False
        i = 0
        while i < len(pts) and len(pts) > 3:
            if _vertex_removable(pts, i):
                del pts[i]
                changed = True
            else:
                i += 1
    return ClosedPolygon(np.array(pts), note=poly.note)


# --- crossing diagram and Alexander determinant ----------------------------


def _direction_list(count: int = 40) -> np.ndarray:
    dirs = [np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for k in range(count - 3):
        z = 1.0 - 2.0 * (k + 0.5) / (count - 3)
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = golden * k
        dirs.append(np.array([r * math.cos(phi), r * math.sin(phi), z]))
    return np.array(dirs)


_DIRECTIONS = _direction_list()


@dataclass(frozen=True)
class _Crossing:
    over_pos: float  # curve position (edge index + parameter) of the over strand
    under_pos: float


def _diagram(poly: ClosedPolygon, direction: np.ndarray) -> list[_Crossing]:
    """Crossings of the projection along *direction*; raises _NotGeneric."""
    d = direction / np.linalg.norm(direction)
    e1, e2 = _plane_basis(d)
    verts = poly.vertices
    flat = np.stack([verts @ e1, verts @ e2], axis=1)
    depth = verts @ d
    n = len(verts)

    starts = flat
    ends = flat[np.r_[1:n, 0]]
    seg = ends - starts
    seg_len = np.linalg.norm(seg, axis=1)
    if np.any(seg_len < EPS_GENERIC):
        raise _NotGeneric("an edge projects to a point")

    crossings: list[_Crossing] = []
    per_edge: dict[int, list[float]] = {}
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent around the wrap
            r = seg[i]
            s = seg[j]
            denom = r[0] * s[1] - r[1] * s[0]
            w = starts[j] - starts[i]
            if abs(denom) < EPS_GENERIC * seg_len[i] * seg_len[j]:
                # parallel in projection: only a problem if overlapping
                off = abs(w[0] * r[1] - w[1] * r[0]) / seg_len[i]
                if off < EPS_GENERIC:
                    raise _NotGeneric(f"edges {i} and {j} overlap in projection")
                continue
            t = (w[0] * s[1] - w[1] * s[0]) / denom
            u = (w[0] * r[1] - w[1] * r[0]) / denom
            margin_t = EPS_GENERIC / seg_len[i]
            margin_u = EPS_GENERIC / seg_len[j]
            if (-margin_t < t < margin_t or 1 - margin_t < t < 1 + margin_t) and (
                -margin_u <= u <= 1 + margin_u
            ):
                raise _NotGeneric(f"crossing lands on a vertex of edge {i}")
            if (-margin_u < u < margin_u or 1 - margin_u < u < 1 + margin_u) and (
                -margin_t <= t <= 1 + margin_t
            ):
                raise _NotGeneric(f"crossing lands on a vertex of edge {j}")
            if not (margin_t <= t <= 1 - margin_t and margin_u <= u <= 1 - margin_u):
                continue
            zi = depth[i] + t * (depth[(i + 1) % n] - depth[i])
            zj = depth[j] + u * (depth[(j + 1) % n] - depth[j])
            if abs(zi - zj) < EPS_GENERIC:
                raise _NotGeneric(f"strands {i},{j} touch along the view direction")
            pos_i = i + t
            pos_j = j + u
            per_edge.setdefault(i, []).append(t)
            per_edge.setdefault(j, []).append(u)
            if zi > zj:
                crossings.append(_Crossing(over_pos=pos_i, under_pos=pos_j))
            else:
                crossings.append(_Crossing(over_pos=pos_j, under_pos=pos_i))

    for params in per_edge.values():
        params.sort()
        for a, b in zip(params, params[1:]):
            if b - a < EPS_GENERIC:
                raise _NotGeneric("two crossings coincide on one edge")
    return crossings


def _int_det(m: list[list[int]]) -> int:
    """Exact integer determinant (fraction-free Bareiss elimination)."""
    n = len(m)
    if n == 0:
        return 1
    a = [row[:] for row in m]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            pivot = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if pivot is None:
                return 0
            a[k], a[pivot] = a[pivot], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _determinant_from_diagram(crossings: list[_Crossing]) -> int:
    """|Delta(-1)| from the underpass presentation of the diagram.

    Generators are the arcs between consecutive underpasses along the curve.
    At underpass k (incoming arc k, outgoing arc k+1, overpassing arc i) the
    abelianized Wirtinger relation at t = -1 contributes the row
    M[k,i] += 2, M[k,k] -= 1, M[k,k+1] -= 1; crossing signs do not matter at
    t = -1.  Any (m-1)x(m-1) minor is +/- the determinant.
    """
    m = len(crossings)
    if m == 0:
        return 1
    order = sorted(range(m), key=lambda idx: crossings[idx].under_pos)
    under_positions = [crossings[idx].under_pos for idx in order]

    def arc_of(pos: float) -> int:
        j = bisect_left(under_positions, pos)
        return j % m

    matrix = [[0] * m for _ in range(m)]
    for k, idx in enumerate(order):
        i = arc_of(crossings[idx].over_pos)
        matrix[k][i] += 2
        matrix[k][k] -= 1
        matrix[k][(k + 1) % m] -= 1
    minor = [row[:-1] for row in matrix[:-1]]
    return abs(_int_det(minor))


def alexander_determinant(poly: ClosedPolygon) -> int:
    """Knot determinant |Delta(-1)| via the first generic projection."""
    det, _ = _analyze(poly)
    return det


def crossing_count(poly: ClosedPolygon) -> int:
    """Crossing count of the first generic projection."""
    _, crossings = _analyze(poly)
    return crossings


def _analyze(poly: ClosedPolygon) -> tuple[int, int]:
    for direction in _DIRECTIONS:
        try:
            crossings = _diagram(poly, direction)
        except _NotGeneric:
            continue
        return _determinant_from_diagram(crossings), len(crossings)
    raise ProjectionFailureError(
        f"no generic projection among {len(_DIRECTIONS)} directions"
    )


def _deterministic_jitter(shape: tuple[int, int], attempt: int, scale: float) -> np.ndarray:
    counter = np.zeros((shape[0], 4), dtype=np.uint64)
    counter[:, 0] = np.arange(shape[0], dtype=np.uint64)
    counter[:, 3] = np.uint64(attempt)
    words = philox4x32(counter, (0x4B4E4F54, attempt))  # key tagged for knot use
    u = (words[:, :3].astype(np.float64) + 0.5) * 2.0**-32
    return scale * (2.0 * u - 1.0)


def classify(poly: ClosedPolygon) -> KnotReport:
    """KMT-reduce, project, and classify a closed polygon.

    Rare non-generic geometry is retried under a deterministic schedule of
    tiny vertex jitters (1e-7 of the polygon extent per attempt).
    """
    reduced = kmt_simplify(poly)
    extent = float(np.ptp(reduced.vertices, axis=0).max()) or 1.0
    note = poly.note
    for attempt in range(6):
        candidate = reduced
        if attempt > 0:
            jitter = _deterministic_jitter(reduced.vertices.shape, attempt, attempt * 1e-7 * extent)
            candidate = ClosedPolygon(reduced.vertices + jitter, note=reduced.note)
            note = (note + "; " if note else "") + f"projection retry {attempt} with jitter"
        try:
            det, crossings = _analyze(candidate)
        except ProjectionFailureError:
            continue
        if det == 1 and crossings <= 2:
            cls = KnotClass.UNKNOT
        elif det == 3:
            cls = KnotClass.TREFOIL
        else:
            cls = KnotClass.OTHER
        return KnotReport(det, crossings, cls, note)
    raise ProjectionFailureError("no generic projection found after jitter retries")


def classify_chain(
    positions: np.ndarray, extension_factor: float = DEFAULT_CLOSURE_FACTOR
) -> KnotReport:
    """Close an open chain and classify the result."""
    return classify(close_chain(positions, extension_factor))


# --- polygon files ---------------------------------------------------------


def load_polygon(path: str | Path) -> ClosedPolygon:
    verts = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'x y z'")
        verts.append([float(v) for v in parts])
    return ClosedPolygon(np.array(verts))


def load_chain(path: str | Path) -> np.ndarray:
    return load_polygon(path).vertices  # same format; reuse validation


def save_polygon(points: np.ndarray, path: str | Path) -> None:
    lines = [f"{float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in np.asarray(points)]
    Path(path).write_text("\n".join(lines) + "\n")


def format_report(report: KnotReport) -> str:
    lines = [
        f"determinant {report.determinant}",
        f"crossings_after_reduction {report.crossings_after_reduction}",
        f"classification {report.classification.value}",
    ]
    if report.note:
        lines.append(f"note {report.note}")
    return "\n".join(lines) + "\n"
