import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchmd.geometry import Pose, vec3
from pinchmd.gestures import (
    GestureState,
    GrabBegin,
    GrabEnd,
    GrabUpdate,
    HandInput,
    TransformBegin,
    TransformEnd,
    TransformUpdate,
    format_commands,
    gesture_step,
    release_hand,
    replay_inputs,
)
from pinchmd.localization import HandSide, zero_offset
from pinchmd.sessions import (
    SessionFormatError,
    parse_session,
    serialize_session,
)

OFFSETS = (zero_offset(HandSide.LEFT), zero_offset(HandSide.RIGHT))


def hand_input(side, t, idx=False, mid=False, pos=(0.0, 0.0, 0.0)):
    return HandInput(side, Pose(position=vec3(*pos)), idx, mid, t)


def pair(t, l_idx=False, l_mid=False, r_idx=False, r_mid=False, l_pos=(0, 0, 0), r_pos=(1, 0, 0)):
    return (
        hand_input(HandSide.LEFT, t, l_idx, l_mid, l_pos),
        hand_input(HandSide.RIGHT, t, r_idx, r_mid, r_pos),
    )


def run(stream, debounce_ms=20):
    return replay_inputs(stream, OFFSETS, debounce_ms)


class TestDebounce:
    def test_all_open_no_commands(self):
        stream = [pair(t) for t in range(0, 100, 10)]
        assert run(stream) == []

    def test_grab_begins_once_stable_for_d(self):
        # hand-traced: rise at t=0, D=20 -> accepted at the t=20 step,
        # updates on the following steps
        stream = [pair(t, l_idx=True) for t in (0, 10, 20, 30, 40)]
        cmds = run(stream)
        assert isinstance(cmds[0], GrabBegin) and cmds[0].hand is HandSide.LEFT
        assert [type(c) for c in cmds] == [GrabBegin, GrabUpdate, GrabUpdate]

    def test_pulse_shorter_than_d_is_silent(self):
        stream = [pair(0), pair(10, l_idx=True), pair(15), pair(40), pair(80)]
        assert run(stream) == []

    def test_release_also_debounced(self):
        stream = [pair(0, l_idx=True), pair(25, l_idx=True), pair(30), pair(35, l_idx=True), pair(80, l_idx=True)]
        cmds = run(stream)
        # the 5 ms open blip at t=30 must not end the grab
        assert [type(c) for c in cmds] == [GrabBegin, GrabUpdate, GrabUpdate, GrabUpdate]

    def test_malformed_timestamp_clamps_and_counts(self):
        state = GestureState()
        gesture_step(state, *pair(100), offsets=OFFSETS)
        gesture_step(state, *pair(50), offsets=OFFSETS)  # goes backwards
        assert state.timestamp_clamps == 2  # both hands clamped
        assert state.left.last_t == 100


class TestGrabSessions:
    def test_grab_point_tracks_hand(self):
        stream = [
            pair(0, l_idx=True, l_pos=(0.1, 0, 0)),
            pair(25, l_idx=True, l_pos=(0.2, 0, 0)),
            pair(50, l_idx=True, l_pos=(0.3, 0, 0)),
            pair(100, l_pos=(0.4, 0, 0)),
            pair(130, l_pos=(0.5, 0, 0)),
        ]
        cmds = run(stream)
        assert cmds[0] == GrabBegin(HandSide.LEFT, (0.2, 0.0, 0.0))
        assert cmds[1] == GrabUpdate(HandSide.LEFT, (0.3, 0.0, 0.0))
        # the release at t=100 commits at the t=130 sample (debounced)
        assert cmds[2] == GrabUpdate(HandSide.LEFT, (0.4, 0.0, 0.0))
        assert cmds[3] == GrabEnd(HandSide.LEFT)

    def test_independent_hands(self):
        stream = [
            pair(0, l_idx=True, r_idx=True),
            pair(25, l_idx=True, r_idx=True),
            pair(50, l_idx=False, r_idx=True),
            pair(75, r_idx=True),
        ]
        cmds = run(stream)
        begins = [c for c in cmds if isinstance(c, GrabBegin)]
        assert {c.hand for c in begins} == {HandSide.LEFT, HandSide.RIGHT}
        ends = [c for c in cmds if isinstance(c, GrabEnd)]
        assert [c.hand for c in ends] == [HandSide.LEFT]


class TestTransformSessions:
    def test_transform_needs_both_middles(self):
        stream = [pair(t, l_mid=True) for t in (0, 25, 50)]
        assert run(stream) == []

    def test_transform_lifecycle(self):
        stream = [
            pair(0, l_mid=True, r_mid=True),
            pair(25, l_mid=True, r_mid=True),
            pair(50, l_mid=True, r_mid=True),
            pair(75, l_mid=True),  # right release begins debouncing here
            pair(100, l_mid=True),  # and commits here
        ]
        cmds = run(stream)
        assert [type(c) for c in cmds] == [
            TransformBegin,
            TransformUpdate,
            TransformUpdate,
            TransformEnd,
        ]

    def test_grab_ends_before_transform_begins(self):
        # left grab active, then both middles close in the same step
        stream = [
            pair(0, l_idx=True),
            pair(25, l_idx=True),
            pair(30, l_idx=True, l_mid=True, r_mid=True),
            pair(55, l_idx=True, l_mid=True, r_mid=True),
        ]
        cmds = run(stream)
        i_end = next(i for i, c in enumerate(cmds) if isinstance(c, GrabEnd))
        i_begin = next(i for i, c in enumerate(cmds) if isinstance(c, TransformBegin))
        assert i_end == i_begin - 1, format_commands(cmds)

    def test_index_during_transform_ignored_not_queued(self):
        stream = [
            pair(0, l_mid=True, r_mid=True),
            # index closes mid-transform and stays held past the end
            pair(25, l_idx=True, l_mid=True, r_mid=True),
            pair(50, l_idx=True, l_mid=True, r_mid=True),
            pair(75, l_idx=True),  # middles released, index still held
            pair(100, l_idx=True),  # transform ends; held index must not grab
            pair(125, l_idx=True),
            # a fresh rising edge is required to grab again
            pair(150),
            pair(175),
            pair(200, l_idx=True),
            pair(225, l_idx=True),
        ]
        cmds = run(stream)
        begins = [i for i, c in enumerate(cmds) if isinstance(c, GrabBegin)]
        end_i = next(i for i, c in enumerate(cmds) if isinstance(c, TransformEnd))
        assert len(begins) == 1
        assert begins[0] > end_i
        # the single grab comes from the fresh edge, at the t=225 point
        assert cmds[begins[0]].hand is HandSide.LEFT

    def test_middle_inert_when_other_hand_absent(self):
        # both circuits on one hand: grab proceeds, middle does nothing
        stream = [
            pair(0, l_idx=True, l_mid=True),
            pair(25, l_idx=True, l_mid=True),
            pair(50, l_idx=True, l_mid=True),
        ]
        cmds = run(stream)
        assert [type(c) for c in cmds] == [GrabBegin, GrabUpdate]


def check_well_formed(cmds):
    """Begin/End alternation and mutual-exclusion validator."""
    grab = {HandSide.LEFT: False, HandSide.RIGHT: False}
    transform = False
    for c in cmds:
        if isinstance(c, GrabBegin):
            assert not grab[c.hand], "GrabBegin while grab active"
            assert not transform, "GrabBegin during transform"
            grab[c.hand] = True
        elif isinstance(c, GrabUpdate):
            assert grab[c.hand], "GrabUpdate outside session"
        elif isinstance(c, GrabEnd):
            assert grab[c.hand], "GrabEnd without begin"
            grab[c.hand] = False
        elif isinstance(c, TransformBegin):
            assert not transform, "TransformBegin while active"
            assert not any(grab.values()), "transform began with grab still active"
            transform = True
        elif isinstance(c, TransformUpdate):
            assert transform, "TransformUpdate outside session"
        elif isinstance(c, TransformEnd):
            assert transform, "TransformEnd without begin"
            transform = False


@st.composite
def input_streams(draw):
    n = draw(st.integers(1, 60))
    stream = []
    t = 0
    for _ in range(n):
        t += draw(st.integers(0, 40))
        stream.append(
            pair(
                t,
                l_idx=draw(st.booleans()),
                l_mid=draw(st.booleans()),
                r_idx=draw(st.booleans()),
                r_mid=draw(st.booleans()),
            )
        )
    return stream


class TestProperties:
    @given(input_streams())
    @settings(max_examples=200, deadline=None)
    def test_random_streams_stay_well_formed(self, stream):
        check_well_formed(run(stream))

    @given(input_streams())
    @settings(max_examples=50, deadline=None)
    def test_replay_is_deterministic(self, stream):
        assert run(stream) == run(stream)

    @given(input_streams())
    @settings(max_examples=50, deadline=None)
    def test_no_simultaneous_grab_and_transform(self, stream):
        state = GestureState()
        for left, right in stream:
            gesture_step(state, left, right, OFFSETS)
            both = state.transform_active and (
                state.left.grab_active or state.right.grab_active
            )
            assert not both


class TestReleaseHand:
    def test_release_ends_grab_immediately(self):
        state = GestureState()
        for t in (0, 25):
            gesture_step(state, *pair(t, l_idx=True), offsets=OFFSETS)
        assert state.left.grab_active
        cmds = release_hand(state, HandSide.LEFT)
        assert cmds == [GrabEnd(HandSide.LEFT)]
        assert not state.left.grab_active

    def test_release_ends_transform(self):
        state = GestureState()
        for t in (0, 25):
            gesture_step(state, *pair(t, l_mid=True, r_mid=True), offsets=OFFSETS)
        assert state.transform_active
        cmds = release_hand(state, HandSide.RIGHT)
        assert cmds == [TransformEnd()]
        assert not state.transform_active

    def test_release_idle_hand_is_silent(self):
        assert release_hand(GestureState(), HandSide.LEFT) == []


class TestSessionFiles:
    def test_round_trip(self):
        stream = [
            pair(0, l_idx=True, l_pos=(0.25, -1.5, 3.375)),
            pair(33, l_idx=True, r_mid=True, l_pos=(0.1234567890123, 0, 0)),
        ]
        text = serialize_session(stream)
        parsed = parse_session(text)
        assert serialize_session(parsed) == text
        assert len(parsed) == 2
        assert parsed[1][1].pinch_middle is True
        assert parsed[0][0].pose.position[2] == 3.375

    def test_empty_session(self):
        assert parse_session("") == []
        assert serialize_session([]) == ""

    def test_malformed_line_reports_number(self):
        text = "0,L,0,0,0,1,0,0,0,0,0\n0,R,0,0,0,1,0,0,0,2,0\n"
        with pytest.raises(SessionFormatError) as exc:
            parse_session(text)
        assert exc.value.lineno == 2

    def test_same_hand_twice_rejected(self):
        line = "0,L,0,0,0,1,0,0,0,0,0"
        with pytest.raises(SessionFormatError):
            parse_session(line + "\n" + line + "\n")

    def test_replay_matches_live_run(self):
        stream = [
            pair(0, l_idx=True),
            pair(25, l_idx=True, l_pos=(0.5, 0.25, 0)),
            pair(50, l_mid=True, r_mid=True),
            pair(75, l_mid=True, r_mid=True),
            pair(100),
        ]
        live = run(stream)
        replayed = run(parse_session(serialize_session(stream)))
        assert format_commands(live) == format_commands(replayed)
        assert live == replayed
