import json

import numpy as np
import pytest

from pinchmd.engine import build_chain
from pinchmd.geometry import Pose, Similarity, vec3
from pinchmd.gestures import HandInput
from pinchmd.localization import HandSide
from pinchmd.protocol import (
    PROTOCOL_VERSION,
    ErrorMsg,
    Frame,
    GrabInfo,
    Hello,
    InputState,
    ProtocolError,
    TransformData,
    Welcome,
    decode_message,
    encode_message,
    topology_sections,
)

from conftest import random_quat


def random_message(rng):
    kind = rng.integers(0, 5)
    if kind == 0:
        hands = [(HandSide.LEFT,), (HandSide.RIGHT,), (HandSide.LEFT, HandSide.RIGHT)][
            rng.integers(0, 3)
        ]
        return Hello(PROTOCOL_VERSION, f"client-{rng.integers(1000)}", hands)
    if kind == 1:
        return Welcome(
            json.dumps(topology_sections(build_chain(int(rng.integers(2, 6)))), separators=(",", ":")),
            int(rng.integers(1, 120)),
        )
    if kind == 2:
        return InputState(
            t=int(rng.integers(0, 10**9)),
            hand=HandSide.LEFT if rng.random() < 0.5 else HandSide.RIGHT,
            pos=tuple(rng.uniform(-10, 10, 3).tolist()),
            rot=tuple((random_quat(rng)).tolist()),
            idx=int(rng.integers(0, 2)),
            mid=int(rng.integers(0, 2)),
        )
    if kind == 3:
        n = int(rng.integers(1, 8))
        grabs = []
        if rng.random() < 0.5:
            grabs.append(GrabInfo(HandSide.LEFT, int(rng.integers(0, n)), tuple(rng.uniform(-5, 5, 3).tolist())))
        return Frame(
            frame_id=int(rng.integers(0, 10**12)),
            sim_time=float(rng.uniform(0, 1e4)),
            positions=tuple(tuple(p) for p in rng.uniform(-20, 20, (n, 3)).tolist()),
            potential_energy=float(rng.standard_normal()),
            kinetic_energy=float(abs(rng.standard_normal())),
            transform=TransformData(
                float(rng.uniform(0.1, 10)),
                tuple(random_quat(rng).tolist()),
                tuple(rng.uniform(-3, 3, 3).tolist()),
            ),
            grabs=tuple(grabs),
        )
    return ErrorMsg(
        ["VERSION", "HAND_TAKEN", "SIM_RESET", "MALFORMED"][rng.integers(0, 4)],
        f"detail {rng.integers(100)}",
    )


class TestRoundTrip:
    def test_thousand_random_messages(self, rng):
        for _ in range(1000):
            msg = random_message(rng)
            text = encode_message(msg)
            back = decode_message(text)
            assert back == msg, f"{msg} -> {text} -> {back}"
            assert encode_message(back) == text

    def test_input_state_from_hand_input(self):
        inp = HandInput(
            HandSide.LEFT,
            Pose(position=vec3(0.125, -2.5, 3.0)),
            True,
            False,
            1234,
        )
        msg = InputState.from_hand_input(inp)
        back = decode_message(encode_message(msg)).to_hand_input()
        assert back.hand is inp.hand
        assert np.array_equal(back.pose.position, inp.pose.position)
        assert back.pinch_index is True and back.pinch_middle is False
        assert back.timestamp == 1234

    def test_transform_data_round_trip(self, rng):
        t = Similarity(scale=2.5, rotation=random_quat(rng), translation=rng.uniform(-1, 1, 3))
        td = TransformData.from_similarity(t)
        back = td.to_similarity()
        p = rng.uniform(-2, 2, 3)
        assert np.allclose(back.apply(p), t.apply(p), atol=1e-12)

    def test_full_float_precision(self):
        value = 0.1234567890123456789
        msg = ErrorMsg("SIM_RESET", "x")
        frame = Frame(1, value, ((value, 0.0, 0.0),), value, value, TransformData(1.0, (1.0, 0, 0, 0), (0, 0, 0)), ())
        back = decode_message(encode_message(frame))
        assert back.sim_time == float(value)
        assert back.positions[0][0] == float(value)


class TestDecodeErrors:
    def test_truncated_payload(self):
        text = encode_message(ErrorMsg("SIM_RESET", "checkpoint"))
        with pytest.raises(ProtocolError):
            decode_message(text[: len(text) // 2])

    def test_unknown_type(self):
        with pytest.raises(ProtocolError) as exc:
            decode_message('{"type":"teleport"}')
        assert exc.value.field == "type"

    def test_bad_hand_names_field(self):
        msg = json.loads(encode_message(InputState(0, HandSide.LEFT, (0, 0, 0), (1, 0, 0, 0), 0, 0)))
        msg["hand"] = "X"
        with pytest.raises(ProtocolError) as exc:
            decode_message(json.dumps(msg))
        assert exc.value.field == "hand"

    def test_missing_field_named(self):
        with pytest.raises(ProtocolError) as exc:
            decode_message('{"type":"hello","version":1,"name":"x"}')
        assert exc.value.field == "hands"

    def test_empty_hands_rejected(self):
        with pytest.raises(ProtocolError) as exc:
            decode_message('{"type":"hello","version":1,"name":"x","hands":[]}')
        assert exc.value.field == "hands"

    def test_bad_circuit_flag(self):
        msg = json.loads(encode_message(InputState(0, HandSide.LEFT, (0, 0, 0), (1, 0, 0, 0), 0, 0)))
        msg["idx"] = 2
        with pytest.raises(ProtocolError) as exc:
            decode_message(json.dumps(msg))
        assert exc.value.field == "idx"

    def test_nonfinite_rejected(self):
        with pytest.raises(ProtocolError):
            decode_message('{"type":"frame","id":1,"time":1e999,"pos":[],"pe":0,"ke":0,'
                           '"xform":{"s":1,"r":[1,0,0,0],"t":[0,0,0]},"grabs":[]}')

    def test_wrong_vector_length(self):
        msg = json.loads(encode_message(InputState(0, HandSide.LEFT, (0, 0, 0), (1, 0, 0, 0), 0, 0)))
        msg["pos"] = [1.0, 2.0]
        with pytest.raises(ProtocolError) as exc:
            decode_message(json.dumps(msg))
        assert exc.value.field == "pos"

    def test_non_object_payload(self):
        with pytest.raises(ProtocolError):
            decode_message("[1,2,3]")

    def test_bad_error_code(self):
        with pytest.raises(ProtocolError) as exc:
            decode_message('{"type":"error","code":"OOPS","detail":"x"}')
        assert exc.value.field == "code"


class TestTopologySections:
    def test_matches_topology(self):
        top = build_chain(4)
        sections = topology_sections(top)
        assert len(sections["atoms"]) == 4
        assert len(sections["bonds"]) == 3
        assert len(sections["angles"]) == 2
        assert sections["lj"]["cutoff"] == top.lj_cutoff
