import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchmd.geometry import (
    Pose,
    Similarity,
    quat_from_axis_angle,
    quat_identity,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
    shortest_arc,
    vec3,
)

from conftest import random_quat, random_unit

ALGEBRA_TOL = 1e-9
TRIG_TOL = 1e-7


def rodrigues(axis: np.ndarray, angle: float) -> np.ndarray:
    """Independent rotation-matrix oracle (Rodrigues formula)."""
    axis = axis / np.linalg.norm(axis)
    kx, ky, kz = axis
    K = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


unit_vectors = st.builds(
    lambda seed: random_unit(np.random.default_rng(seed)), st.integers(0, 2**32 - 1)
)
quats = st.builds(
    lambda seed: random_quat(np.random.default_rng(seed)), st.integers(0, 2**32 - 1)
)


class TestQuaternions:
    def test_identity_rotation_is_noop(self):
        v = vec3(1.0, 2.0, 3.0)
        assert np.allclose(quat_rotate(quat_identity(), v), v, atol=ALGEBRA_TOL)

    @given(quats, quats)
    def test_composition_stays_unit(self, q1, q2):
        assert abs(np.linalg.norm(quat_multiply(q1, q2)) - 1.0) < ALGEBRA_TOL

    @given(quats, unit_vectors)
    def test_rotation_preserves_length(self, q, v):
        assert abs(np.linalg.norm(quat_rotate(q, 2.5 * v)) - 2.5) < ALGEBRA_TOL

    @given(quats, unit_vectors)
    def test_rotate_matches_matrix_oracle(self, q, v):
        assert np.allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-12)

    def test_zero_quaternion_rejected(self):
        with pytest.raises(ValueError):
            quat_normalize([0.0, 0.0, 0.0, 0.0])


class TestShortestArc:
    def test_same_vector_gives_identity(self):
        q = shortest_arc(vec3(1, 0, 0), vec3(1, 0, 0))
        assert np.allclose(q, quat_identity(), atol=ALGEBRA_TOL)

    def test_x_to_y_is_quarter_turn_about_z(self):
        q = shortest_arc(vec3(1, 0, 0), vec3(0, 1, 0))
        expected = quat_from_axis_angle(vec3(0, 0, 1), math.pi / 2)
        assert np.allclose(q, expected, atol=TRIG_TOL)

    def test_antiparallel_uses_deterministic_axis(self):
        # For u = +x the basis vector least aligned with u is e_y (tied with
        # e_z, lowest index wins), so the axis is normalize(x cross y) = +z.
        u, v = vec3(1, 0, 0), vec3(-1, 0, 0)
        q = shortest_arc(u, v)
        oracle = rodrigues(np.array([0.0, 0.0, 1.0]), math.pi)
        assert np.allclose(quat_rotate(q, u), oracle @ u, atol=TRIG_TOL)
        assert np.allclose(quat_rotate(q, u), v, atol=TRIG_TOL)

    def test_antiparallel_tiebreak_for_diagonal_input(self):
        u = np.array([1.0, 1.0, 1.0]) / math.sqrt(3)
        q = shortest_arc(u, -u)
        # all axes tie, index 0 wins: axis = normalize(u cross e_x)
        axis = np.cross(u, np.array([1.0, 0.0, 0.0]))
        oracle = rodrigues(axis, math.pi)
        assert np.allclose(quat_rotate(q, u), oracle @ u, atol=TRIG_TOL)
        assert np.allclose(quat_rotate(q, u), -u, atol=TRIG_TOL)

    @given(unit_vectors, unit_vectors)
    def test_maps_u_to_v(self, u, v):
        q = shortest_arc(u, v)
        assert np.allclose(quat_rotate(q, u), v, atol=TRIG_TOL)

    @given(unit_vectors, unit_vectors)
    def test_angle_is_minimal(self, u, v):
        q = shortest_arc(u, v)
        angle = 2.0 * math.atan2(np.linalg.norm(q[1:]), q[0])
        expected = math.acos(np.clip(np.dot(u, v), -1.0, 1.0))
        assert abs(angle - expected) < TRIG_TOL

    @given(unit_vectors, unit_vectors)
    def test_round_trip_composes_to_identity(self, u, v):
        if np.dot(u, v) < -1 + 1e-6:
            return  # antiparallel round trip may differ by axis convention
        q = quat_multiply(shortest_arc(v, u), shortest_arc(u, v))
        angle = 2.0 * math.atan2(np.linalg.norm(q[1:]), abs(q[0]))
        assert angle < TRIG_TOL


def random_similarity(rng) -> Similarity:
    return Similarity(
        scale=float(rng.uniform(0.2, 5.0)),
        rotation=random_quat(rng),
        translation=rng.uniform(-3, 3, 3),
    )


class TestSimilarity:
    def test_identity_apply(self):
        assert np.allclose(Similarity.identity().apply(vec3(1, 2, 3)), [1, 2, 3])

    def test_scale_then_translate(self):
        t = Similarity(scale=2.0, translation=vec3(1, 0, 0))
        assert np.allclose(t.apply(vec3(1, 0, 0)), [3, 0, 0], atol=ALGEBRA_TOL)

    def test_inverse_round_trip(self, rng):
        for _ in range(100):
            t = random_similarity(rng)
            p = rng.uniform(-5, 5, 3)
            assert np.allclose(t.inverse().apply(t.apply(p)), p, atol=ALGEBRA_TOL)

    def test_compose_identity_left(self, rng):
        b = random_similarity(rng)
        c = Similarity.identity().compose(b)
        p = rng.uniform(-2, 2, 3)
        assert np.allclose(c.apply(p), b.apply(p), atol=ALGEBRA_TOL)

    def test_compose_with_inverse_is_identity(self, rng):
        a = random_similarity(rng)
        c = a.compose(a.inverse())
        for _ in range(20):
            p = rng.uniform(-5, 5, 3)
            assert np.allclose(c.apply(p), p, atol=ALGEBRA_TOL)

    def test_compose_matches_two_step_application(self, rng):
        # oracle: apply B then A directly, point by point
        a, b = random_similarity(rng), random_similarity(rng)
        c = a.compose(b)
        for _ in range(100):
            p = rng.uniform(-5, 5, 3)
            assert np.allclose(c.apply(p), a.apply(b.apply(p)), atol=ALGEBRA_TOL)

    def test_preserves_distance_ratios(self, rng):
        t = random_similarity(rng)
        for _ in range(50):
            p, q = rng.uniform(-4, 4, 3), rng.uniform(-4, 4, 3)
            got = np.linalg.norm(t.apply(p) - t.apply(q))
            assert abs(got - t.scale * np.linalg.norm(p - q)) < ALGEBRA_TOL * 10

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(ValueError):
            Similarity(scale=0.0)
        with pytest.raises(ValueError):
            Similarity(scale=-1.0)


class TestPose:
    def test_transform_round_trip(self, rng):
        for _ in range(50):
            pose = Pose(position=rng.uniform(-2, 2, 3), orientation=random_quat(rng))
            local = rng.uniform(-1, 1, 3)
            world = pose.transform_point(local)
            assert np.allclose(pose.inverse_transform_point(world), local, atol=ALGEBRA_TOL)

    def test_rejects_nonfinite_position(self):
        with pytest.raises(ValueError):
            Pose(position=[np.nan, 0, 0])
