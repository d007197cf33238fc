"""Reading and writing recorded input sessions.

Line format, one hand sample per line:

    t_ms,hand,px,py,pz,qw,qx,qy,qz,idx,mid

Hands are L/R, circuits 0/1, floats in full round-trip precision.  A step of
the gesture engine consumes one left and one right sample, so sessions are
stored as consecutive line pairs covering both hands (in either order).
"""

from __future__ import annotations

from pathlib import Path

from .geometry import Pose
from .gestures import HandInput
from .localization import HandSide


class SessionFormatError(Exception):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


def format_input(inp: HandInput) -> str:
    p = inp.pose.position
    q = inp.pose.orientation
    fields = [
        str(inp.timestamp),
        inp.hand.value,
        repr(float(p[0])),
        repr(float(p[1])),
        repr(float(p[2])),
        repr(float(q[0])),
        repr(float(q[1])),
        repr(float(q[2])),
        repr(float(q[3])),
        "1" if inp.pinch_index else "0",
        "1" if inp.pinch_middle else "0",
    ]
    return ",".join(fields)


def parse_input_line(line: str, lineno: int = 0) -> HandInput:
    parts = line.split(",")
    if len(parts) != 11:
        raise SessionFormatError(lineno, f"expected 11 fields, got {len(parts)}")
    try:
        t = int(parts[0])
        hand = HandSide.parse(parts[1])
        nums = [float(x) for x in parts[2:9]]
        idx, mid = parts[9].strip(), parts[10].strip()
        if idx not in ("0", "1") or mid not in ("0", "1"):
            raise ValueError(f"circuit flags must be 0 or 1, got {idx!r},{mid!r}")
    except ValueError as exc:
        raise SessionFormatError(lineno, str(exc)) from exc
    pose = Pose(position=nums[0:3], orientation=nums[3:7])
    return HandInput(hand, pose, idx == "1", mid == "1", t)


def serialize_session(stream: list[tuple[HandInput, HandInput]]) -> str:
    lines = []
    for left, right in stream:
        lines.append(format_input(left))
        lines.append(format_input(right))
    return "".join(line + "\n" for line in lines)


def parse_session(text: str) -> list[tuple[HandInput, HandInput]]:
    inputs: list[tuple[int, HandInput]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        inputs.append((lineno, parse_input_line(line, lineno)))
    if len(inputs) % 2:
        raise SessionFormatError(inputs[-1][0], "dangling sample: session lines must pair L and R")
    stream: list[tuple[HandInput, HandInput]] = []
    for (ln_a, a), (ln_b, b) in zip(inputs[::2], inputs[1::2]):
        if a.hand == b.hand:
            raise SessionFormatError(ln_b, f"two consecutive {a.hand.value} samples; expected the other hand")
        pair = (a, b) if a.hand is HandSide.LEFT else (b, a)
        stream.append(pair)
    return stream


def record_session(stream: list[tuple[HandInput, HandInput]], path: str | Path) -> None:
    Path(path).write_text(serialize_session(stream))


def replay_session(path: str | Path) -> list[tuple[HandInput, HandInput]]:
    return parse_session(Path(path).read_text())
