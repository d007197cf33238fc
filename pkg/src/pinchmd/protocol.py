"""JSON wire protocol (version 1) between clients and the physics server.

Every message is a JSON object with a ``type`` field, sent as a WebSocket
text frame.  Messages are plain immutable values (tuples of floats), so
``decode_message(encode_message(m)) == m`` holds exactly for every message
type; converters to the richer domain objects live on the dataclasses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, Similarity
from .gestures import HandInput
from .localization import HandSide

PROTOCOL_VERSION = 1

ERROR_CODES = ("VERSION", "HAND_TAKEN", "SIM_RESET", "MALFORMED")

Vec3T = tuple[float, float, float]
QuatT = tuple[float, float, float, float]


class ProtocolError(Exception):
    """Malformed message; ``field`` names the offending part."""

    def __init__(self, field_name: str, message: str = ""):
        self.field = field_name
        super().__init__(f"bad field {field_name!r}" + (f": {message}" if message else ""))


@dataclass(frozen=True)
class Hello:
    version: int
    name: str
    hands: tuple[HandSide, ...]


@dataclass(frozen=True)
class Welcome:
    topology_json: str  # canonical JSON text of the topology sections
    frame_rate: int

    def topology(self) -> dict:
        return json.loads(self.topology_json)


@dataclass(frozen=True)
class InputState:
    t: int
    hand: HandSide
    pos: Vec3T
    rot: QuatT
    idx: int
    mid: int

    @staticmethod
    def from_hand_input(inp: HandInput) -> "InputState":
        return InputState(
            t=inp.timestamp,
            hand=inp.hand,
            pos=tuple(float(v) for v in inp.pose.position),
            rot=tuple(float(v) for v in inp.pose.orientation),
            idx=1 if inp.pinch_index else 0,
            mid=1 if inp.pinch_middle else 0,
        )

    def to_hand_input(self) -> HandInput:
        pose = Pose(position=np.array(self.pos), orientation=np.array(self.rot))
        return HandInput(self.hand, pose, bool(self.idx), bool(self.mid), self.t)


@dataclass(frozen=True)
class TransformData:
    scale: float
    rotation: QuatT  # w-first unit quaternion
    translation: Vec3T

    @staticmethod
    def from_similarity(t: Similarity) -> "TransformData":
        return TransformData(
            float(t.scale),
            tuple(float(v) for v in t.rotation),
            tuple(float(v) for v in t.translation),
        )

    def to_similarity(self) -> Similarity:
        return Similarity(
            scale=self.scale,
            rotation=np.array(self.rotation),
            translation=np.array(self.translation),
        )


@dataclass(frozen=True)
class GrabInfo:
    hand: HandSide
    atom: int
    target: Vec3T


@dataclass(frozen=True)
class Frame:
    frame_id: int
    sim_time: float
    positions: tuple[Vec3T, ...]
    potential_energy: float
    kinetic_energy: float
    transform: TransformData
    grabs: tuple[GrabInfo, ...]

    def positions_array(self) -> np.ndarray:
        return np.array(self.positions, dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class ErrorMsg:
    code: str
    detail: str


Message = Hello | Welcome | InputState | Frame | ErrorMsg


def encode_message(msg: Message) -> str:
    match msg:
        case Hello(version, name, hands):
            body = {
                "type": "hello",
                "version": version,
                "name": name,
                "hands": [h.value for h in hands],
            }
        case Welcome(topology_json, frame_rate):
            body = {
                "type": "welcome",
                "topology": json.loads(topology_json),
                "frame_rate": frame_rate,
            }
        case InputState(t, hand, pos, rot, idx, mid):
            body = {
                "type": "input",
                "t": t,
                "hand": hand.value,
                "pos": list(pos),
                "rot": list(rot),
                "idx": idx,
                "mid": mid,
            }
        case Frame(frame_id, sim_time, positions, pe, ke, transform, grabs):
            body = {
                "type": "frame",
                "id": frame_id,
                "time": sim_time,
                "pos": [list(p) for p in positions],
                "pe": pe,
                "ke": ke,
                "xform": {
                    "s": transform.scale,
                    "r": list(transform.rotation),
                    "t": list(transform.translation),
                },
                "grabs": [
                    {"hand": g.hand.value, "atom": g.atom, "target": list(g.target)}
                    for g in grabs
                ],
            }
        case ErrorMsg(code, detail):
            body = {"type": "error", "code": code, "detail": detail}
        case _:
            raise TypeError(f"cannot encode {msg!r}")
    return json.dumps(body, separators=(",", ":"))


def _need(obj: dict, key: str, kind, ctx: str = ""):
    name = f"{ctx}.{key}" if ctx else key
    if key not in obj:
        raise ProtocolError(name, "missing")
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ProtocolError(name, f"expected number, got {type(val).__name__}")
        val = float(val)
        if not math.isfinite(val):
            raise ProtocolError(name, "must be finite")
        return val
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ProtocolError(name, f"expected integer, got {type(val).__name__}")
        return val
    if not isinstance(val, kind):
        raise ProtocolError(name, f"expected {kind.__name__}, got {type(val).__name__}")
    return val


def _hand(value, field_name: str) -> HandSide:
    if value == "L":
        return HandSide.LEFT
    if value == "R":
        return HandSide.RIGHT
    raise ProtocolError(field_name, f"expected 'L' or 'R', got {value!r}")


def _vector(obj: dict, key: str, length: int, ctx: str = "") -> tuple[float, ...]:
    name = f"{ctx}.{key}" if ctx else key
    val = _need(obj, key, list, ctx)
    if len(val) != length:
        raise ProtocolError(name, f"expected {length} numbers, got {len(val)}")
    out = []
    for k, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(float(v)):
            raise ProtocolError(f"{name}[{k}]", "expected finite number")
        out.append(float(v))
    return tuple(out)


def decode_message(text: str | bytes) -> Message:
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError("(payload)", f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("(payload)", "expected a JSON object")
    mtype = _need(obj, "type", str)

    if mtype == "hello":
        version = _need(obj, "version", int)
        name = _need(obj, "name", str)
        hands_raw = _need(obj, "hands", list)
        if not hands_raw:
            raise ProtocolError("hands", "must claim at least one hand")
        hands = tuple(_hand(h, "hands") for h in hands_raw)
        if len(set(hands)) != len(hands):
            raise ProtocolError("hands", "duplicate hand")
        return Hello(version, name, hands)

    if mtype == "welcome":
        topology = _need(obj, "topology", dict)
        return Welcome(json.dumps(topology, separators=(",", ":")), _need(obj, "frame_rate", int))

    if mtype == "input":
        t = _need(obj, "t", int)
        hand = _hand(_need(obj, "hand", str), "hand")
        pos = _vector(obj, "pos", 3)
        rot = _vector(obj, "rot", 4)
        idx = _need(obj, "idx", int)
        mid = _need(obj, "mid", int)
        if idx not in (0, 1):
            raise ProtocolError("idx", "must be 0 or 1")
        if mid not in (0, 1):
            raise ProtocolError("mid", "must be 0 or 1")
        if abs(sum(c * c for c in rot) - 1.0) > 1e-6:
            raise ProtocolError("rot", "quaternion must be unit length")
        return InputState(t, hand, pos, rot, idx, mid)

    if mtype == "frame":
        frame_id = _need(obj, "id", int)
        sim_time = _need(obj, "time", float)
        pos_raw = _need(obj, "pos", list)
        positions = []
        for k, p in enumerate(pos_raw):
            if not isinstance(p, list) or len(p) != 3:
                raise ProtocolError(f"pos[{k}]", "expected [x, y, z]")
            for v in p:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ProtocolError(f"pos[{k}]", "expected numbers")
            positions.append(tuple(float(v) for v in p))
        pe = _need(obj, "pe", float)
        ke = _need(obj, "ke", float)
        xf = _need(obj, "xform", dict)
        scale = _need(xf, "s", float, "xform")
        if scale <= 0:
            raise ProtocolError("xform.s", "scale must be positive")
        transform = TransformData(scale, _vector(xf, "r", 4, "xform"), _vector(xf, "t", 3, "xform"))
        grabs = []
        for k, g in enumerate(_need(obj, "grabs", list)):
            if not isinstance(g, dict):
                raise ProtocolError(f"grabs[{k}]", "expected object")
            grabs.append(
                GrabInfo(
                    _hand(_need(g, "hand", str, f"grabs[{k}]"), f"grabs[{k}].hand"),
                    _need(g, "atom", int, f"grabs[{k}]"),
                    _vector(g, "target", 3, f"grabs[{k}]"),
                )
            )
        return Frame(frame_id, sim_time, tuple(positions), pe, ke, transform, tuple(grabs))

    if mtype == "error":
        code = _need(obj, "code", str)
        if code not in ERROR_CODES:
            raise ProtocolError("code", f"unknown error code {code!r}")
        return ErrorMsg(code, _need(obj, "detail", str))

    raise ProtocolError("type", f"unknown message type {mtype!r}")


def topology_sections(top) -> dict:
    """Topology rendered as the JSON equivalent of the topology file."""
    return {
        "atoms": [[i, float(m)] for i, m in enumerate(top.masses)],
        "bonds": [
            [int(i), int(j), float(r0), float(k)]
            for (i, j), r0, k in zip(top.bonds, top.bond_r0, top.bond_k)
        ],
        "angles": [
            [int(i), int(j), int(k), float(t0), float(kt)]
            for (i, j, k), t0, kt in zip(top.angles, top.angle_theta0, top.angle_k)
        ],
        "lj": {
            "epsilon": float(top.lj_epsilon),
            "sigma": float(top.lj_sigma),
            "cutoff": float(top.lj_cutoff),
        },
    }
