import numpy as np
import pytest

from pinchmd.geometry import Similarity, quat_rotate, vec3
from pinchmd.world_transform import (
    HandsCoincidentError,
    transform_begin,
    transform_update,
)

from conftest import random_quat


def random_similarity(rng):
    return Similarity(
        scale=float(rng.uniform(0.3, 3.0)),
        rotation=random_quat(rng),
        translation=rng.uniform(-2, 2, 3),
    )


def random_session(rng):
    t0 = random_similarity(rng)
    a0 = rng.uniform(-1, 1, 3)
    b0 = a0 + rng.uniform(0.05, 1.0) * _unit(rng)
    s = transform_begin(a0, b0, t0)
    a = rng.uniform(-1, 1, 3)
    b = a + rng.uniform(0.05, 1.0) * _unit(rng)
    return s, a, b


def _unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


class TestBegin:
    def test_session_captures_inputs(self):
        t = Similarity.identity()
        s = transform_begin(vec3(0, 0, 0), vec3(0.4, 0, 0), t)
        assert np.allclose(s.a0, [0, 0, 0])
        assert np.allclose(s.b0, [0.4, 0, 0])
        assert s.t0 is t

    def test_coincident_hands_rejected(self):
        with pytest.raises(HandsCoincidentError):
            transform_begin(vec3(0, 0, 0), vec3(1e-6, 0, 0), Similarity.identity())

    def test_zero_motion_returns_t0(self, rng):
        for _ in range(20):
            s, _, _ = random_session(rng)
            t = transform_update(s, s.a0, s.b0)
            for _ in range(5):
                p = rng.uniform(-2, 2, 3)
                assert np.allclose(t.apply(p), s.t0.apply(p), atol=1e-12)


class TestUpdate:
    def test_pure_scale_about_midpoint(self):
        # hands move apart symmetrically: scale 2 about (0.1, 0, 0)
        s = transform_begin(vec3(0, 0, 0), vec3(0.2, 0, 0), Similarity.identity())
        t = transform_update(s, vec3(-0.1, 0, 0), vec3(0.3, 0, 0))
        assert abs(t.scale - 2.0) < 1e-12
        # oracle: G(x) = 2(x - m0) + m0 with m0 = (0.1, 0, 0)
        for p in ([0, 0, 0], [0.2, 0, 0], [0.5, -0.3, 1.0]):
            p = np.asarray(p, float)
            expected = 2.0 * (p - [0.1, 0, 0]) + [0.1, 0, 0]
            assert np.allclose(t.apply(p), expected, atol=1e-9)

    def test_pure_rotation_quarter_turn(self):
        s = transform_begin(vec3(0, 0, 0), vec3(0.2, 0, 0), Similarity.identity())
        t = transform_update(s, vec3(0, 0, 0), vec3(0, 0.2, 0))
        assert abs(t.scale - 1.0) < 1e-12
        assert np.allclose(t.apply(s.a0), [0, 0, 0], atol=1e-9)
        assert np.allclose(t.apply(s.b0), [0, 0.2, 0], atol=1e-9)

    def test_anchor_fidelity_random_sessions(self, rng):
        for _ in range(500):
            s, a, b = random_session(rng)
            t = transform_update(s, a, b)
            pre_a = s.t0.inverse().apply(s.a0)
            pre_b = s.t0.inverse().apply(s.b0)
            assert np.allclose(t.apply(pre_a), a, atol=1e-7)
            assert np.allclose(t.apply(pre_b), b, atol=1e-7)

    def test_scale_positive_and_proportional(self, rng):
        for _ in range(100):
            s, a, b = random_session(rng)
            t = transform_update(s, a, b)
            expected = s.t0.scale * np.linalg.norm(b - a) / np.linalg.norm(s.b0 - s.a0)
            assert t.scale > 0
            assert abs(t.scale - expected) < 1e-9 * max(1, expected)

    def test_no_roll_axis_condition(self, rng):
        # incremental rotation axis must be perpendicular to both hand axes
        from pinchmd.geometry import shortest_arc

        for _ in range(200):
            s, a, b = random_session(rng)
            d0 = (s.b0 - s.a0) / np.linalg.norm(s.b0 - s.a0)
            d = (b - a) / np.linalg.norm(b - a)
            if d0 @ d < -1 + 1e-9:
                continue
            q = shortest_arc(d0, d)
            axis_len = np.linalg.norm(q[1:])
            if axis_len < 1e-12:
                continue  # no rotation at all
            axis = q[1:] / axis_len
            assert abs(axis @ d0) < 1e-7
            assert abs(axis @ d) < 1e-7

    def test_two_step_vs_one_step_anchor_agreement(self, rng):
        for _ in range(100):
            t0 = random_similarity(rng)
            a0, b0 = rng.uniform(-1, 1, 3), None
            a0 = rng.uniform(-1, 1, 3)
            b0 = a0 + rng.uniform(0.1, 1.0) * _unit(rng)
            a1 = rng.uniform(-1, 1, 3)
            b1 = a1 + rng.uniform(0.1, 1.0) * _unit(rng)
            a2 = rng.uniform(-1, 1, 3)
            b2 = a2 + rng.uniform(0.1, 1.0) * _unit(rng)

            s01 = transform_begin(a0, b0, t0)
            t1 = transform_update(s01, a1, b1)
            s12 = transform_begin(a1, b1, t1)
            t2_stepped = transform_update(s12, a2, b2)

            s02 = transform_begin(a0, b0, t0)
            t2_direct = transform_update(s02, a2, b2)

            pre_a = t0.inverse().apply(a0)
            pre_b = t0.inverse().apply(b0)
            # both routes must pin the anchors; roll may differ
            assert np.allclose(t2_stepped.apply(pre_a), t2_direct.apply(pre_a), atol=1e-6)
            assert np.allclose(t2_stepped.apply(pre_b), t2_direct.apply(pre_b), atol=1e-6)

    def test_coincident_update_returns_previous_and_degrades(self):
        s = transform_begin(vec3(0, 0, 0), vec3(0.2, 0, 0), Similarity.identity())
        t1 = transform_update(s, vec3(0, 0, 0), vec3(0.4, 0, 0))
        t2 = transform_update(s, vec3(0.1, 0, 0), vec3(0.1 + 1e-7, 0, 0))
        assert t2 is t1
        assert s.degraded
