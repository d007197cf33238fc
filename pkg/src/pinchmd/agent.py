"""Scripted agent that ties a knot in the live simulation over the wire.

A plan is a list of per-hand keyframes (time, position, circuit states);
the executor interpolates hand positions between keyframes, sends one input
pair per received frame with timestamps spaced as if the session ran at
30 Hz, and periodically classifies the streamed chain with the knot oracle.
Together with the server's lockstep mode this makes entire networked runs
reproducible: the same plan and seed give the same frame count every time.
"""

from __future__ import annotations

import asyncio
import logging
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from websockets.asyncio.client import connect

from .gestures import HandInput
from .geometry import Pose
from .knots import KnotClass, KnotReport, classify_chain
from .localization import HandSide
from .protocol import (
    PROTOCOL_VERSION,
    ErrorMsg,
    Frame,
    Hello,
    InputState,
    Welcome,
    decode_message,
    encode_message,
)

logger = logging.getLogger("pinchmd.agent")

FRAME_MS = 1000.0 / 30.0  # plan timestamps assume a 30 Hz cadence


class PlanFormatError(Exception):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


@dataclass(frozen=True)
class Keyframe:
    t_ms: int
    pos: tuple[float, float, float]
    idx: bool
    mid: bool


@dataclass
class AgentPlan:
    """Per-hand keyframe tracks with strictly increasing timestamps."""

    left: list[Keyframe]
    right: list[Keyframe]

    def __post_init__(self):
        for track in (self.left, self.right):
            for a, b in zip(track, track[1:]):
                if b.t_ms <= a.t_ms:
                    raise ValueError("keyframe timestamps must strictly increase per hand")

    def duration_ms(self) -> int:
        last = 0
        for track in (self.left, self.right):
            if track:
                last = max(last, track[-1].t_ms)
        return last

    def sample(self, hand: HandSide, t_ms: float) -> tuple[tuple[float, float, float], bool, bool]:
        """Hand position (interpolated) and circuit states (held) at t_ms."""
        track = self.left if hand is HandSide.LEFT else self.right
        if not track:
            return (0.0, 0.0, 0.0), False, False
        times = [k.t_ms for k in track]
        i = bisect_right(times, t_ms) - 1
        if i < 0:
            return track[0].pos, False, False  # before the first keyframe: idle
        if i >= len(track) - 1:
            k = track[-1]
            return k.pos, k.idx, k.mid
        a, b = track[i], track[i + 1]
        f = (t_ms - a.t_ms) / (b.t_ms - a.t_ms)
        pos = tuple(pa + f * (pb - pa) for pa, pb in zip(a.pos, b.pos))
        return pos, a.idx, a.mid


def serialize_plan(plan: AgentPlan) -> str:
    lines = ["# t_ms,hand,x,y,z,idx,mid"]
    merged = [(k.t_ms, "L", k) for k in plan.left] + [(k.t_ms, "R", k) for k in plan.right]
    merged.sort(key=lambda row: (row[0], row[1]))
    for t, hand, k in merged:
        lines.append(
            f"{t},{hand},{k.pos[0]!r},{k.pos[1]!r},{k.pos[2]!r},{int(k.idx)},{int(k.mid)}"
        )
    return "\n".join(lines) + "\n"


def parse_plan(text: str) -> AgentPlan:
    left: list[Keyframe] = []
    right: list[Keyframe] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise PlanFormatError(lineno, f"expected 7 fields, got {len(parts)}")
        try:
            t = int(parts[0])
            hand = HandSide.parse(parts[1])
            pos = (float(parts[2]), float(parts[3]), float(parts[4]))
            idx, mid = int(parts[5]), int(parts[6])
            if idx not in (0, 1) or mid not in (0, 1):
                raise ValueError("circuits must be 0 or 1")
        except ValueError as exc:
            raise PlanFormatError(lineno, str(exc)) from exc
        (left if hand is HandSide.LEFT else right).append(Keyframe(t, pos, bool(idx), bool(mid)))
    return AgentPlan(left, right)


def load_plan(path: str | Path) -> AgentPlan:
    return parse_plan(Path(path).read_text())


def save_plan(plan: AgentPlan, path: str | Path) -> None:
    Path(path).write_text(serialize_plan(plan))


def plan_input(plan: AgentPlan, hand: HandSide, t_ms: int) -> InputState:
    pos, idx, mid = plan.sample(hand, t_ms)
    return InputState(
        t=t_ms,
        hand=hand,
        pos=pos,
        rot=(1.0, 0.0, 0.0, 0.0),
        idx=1 if idx else 0,
        mid=1 if mid else 0,
    )


def plan_hand_inputs(plan: AgentPlan, t_ms: int) -> tuple[HandInput, HandInput]:
    """The (left, right) HandInput pair the agent would send at t_ms."""
    return (
        plan_input(plan, HandSide.LEFT, t_ms).to_hand_input(),
        plan_input(plan, HandSide.RIGHT, t_ms).to_hand_input(),
    )


@dataclass
class KnottingResult:
    success: bool
    frames_used: int
    report: KnotReport | None


async def run_knotting(
    url: str,
    plan: AgentPlan,
    budget_frames: int,
    check_every: int = 200,
    record_path: str | Path | None = None,
) -> KnottingResult:
    """Drive the plan against a live server until the oracle sees a trefoil.

    The first check happens once the plan has fully played out (plus the
    trailing keyframe hold); afterwards every check_every frames up to the
    frame budget.  Returns the first success or the final failing report.
    """
    plan_frames = int(plan.duration_ms() / FRAME_MS) + 1
    recorded: list[tuple[HandInput, HandInput]] = []
    report: KnotReport | None = None

    async with connect(url, max_size=2**22) as ws:
        await ws.send(
            encode_message(Hello(PROTOCOL_VERSION, "knot-agent", (HandSide.LEFT, HandSide.RIGHT)))
        )
        # prime the lockstep gate so the first tick can fire
        for hand in (HandSide.LEFT, HandSide.RIGHT):
            await ws.send(encode_message(plan_input(plan, hand, 0)))

        frames_seen = 0
        while frames_seen < budget_frames:
            msg = decode_message(await ws.recv())
            if isinstance(msg, Welcome):
                continue
            if isinstance(msg, ErrorMsg):
                if msg.code in ("VERSION", "HAND_TAKEN"):
                    raise RuntimeError(f"server refused agent: {msg.code} {msg.detail}")
                logger.warning("server error during run: %s %s", msg.code, msg.detail)
                continue
            if not isinstance(msg, Frame):
                continue
            frames_seen += 1
            t_ms = int(frames_seen * FRAME_MS)
            left = plan_input(plan, HandSide.LEFT, t_ms)
            right = plan_input(plan, HandSide.RIGHT, t_ms)
            await ws.send(encode_message(left))
            await ws.send(encode_message(right))
            if record_path is not None:
                recorded.append((left.to_hand_input(), right.to_hand_input()))

            due = frames_seen >= plan_frames and (frames_seen - plan_frames) % check_every == 0
            if due:
                report = classify_chain(msg.positions_array())
                logger.info(
                    "frame %d: determinant %d (%s)",
                    frames_seen,
                    report.determinant,
                    report.classification.value,
                )
                if report.classification is KnotClass.TREFOIL:
                    if record_path is not None:
                        from .sessions import record_session

                        record_session(recorded, record_path)
                    return KnottingResult(True, frames_seen, report)

    if record_path is not None:
        from .sessions import record_session

        record_session(recorded, record_path)
    return KnottingResult(False, budget_frames, report)


def scripted_knotting(
    url: str, plan: AgentPlan, budget_frames: int, check_every: int = 200
) -> KnottingResult:
    """Synchronous wrapper around run_knotting."""
    return asyncio.run(run_knotting(url, plan, budget_frames, check_every))


# --- reference plan --------------------------------------------------------
#
# Overhand-knot weave: the right hand grabs the free chain end and threads
# it over the resting chain, back under it, and out over its own arc; the
# rest of the chain stays put (no slack to collapse), and the lay that
# results is a trefoil.  The left hand briefly pins the far end so both
# hands exercise the protocol.  Tuned against the default 50-bead chain and
# the harness integrator settings below.

KNOT_INTEGRATOR = dict(dt=0.005, thermostat="langevin", temperature=0.02, friction=2.0)
REFERENCE_SEED = 20200828

# Waypoints for the dragged end, in simulation units.  The left hand pins a
# bead just right of the weave zone, which blocks the working tension from
# towing the standing chain the end weaves through; the slack bight is
# parked high (+y) first so it drapes clear of the crossings.  A "None"
# entry marks a dwell (hold position) so the bight can settle.
WEAVE_WAYPOINTS = (
    (46.0, 5.0, 0.0),  # peel the end off the chain line
    (30.0, 8.0, 0.0),  # sweep high, the slack bight trails behind
    (17.0, 8.0, 0.0),  # park above the weave zone
    None,  # dwell: let the bight settle
    (14.5, 0.5, 1.6),  # descend, crossing OVER the standing chain
    (14.8, -3.0, 0.5),
    (18.0, -3.5, 0.2),  # sweep right underneath
    (18.7, 1.0, -1.5),  # rise, crossing back UNDER the standing chain
    (17.5, 2.8, -0.5),  # inside the loop
    (15.5, 4.2, 2.2),  # cross OVER the descending wall on the way out
    (13.5, 6.5, 1.0),
    (12.5, 8.0, 0.0),  # park
)

PIN_BEAD = 21  # left-hand anchor between the rope reservoir and the weave zone
DWELL_FRAMES = 400


def make_reference_plan(
    n_beads: int = 50,
    weave_frames: int = 7000,
    waypoints: tuple = WEAVE_WAYPOINTS,
    settle_frames: int = 500,
) -> AgentPlan:
    from .engine import zigzag_positions

    pos0 = zigzag_positions(n_beads)
    pin_pos = pos0[PIN_BEAD]
    bead_last = pos0[-1]

    def ms(frame: float) -> int:
        return int(round(frame * FRAME_MS))

    # left hand pins its bead for the whole weave
    left = [
        Keyframe(ms(0), tuple(pin_pos), False, False),
        Keyframe(ms(10), tuple(pin_pos), True, False),
        Keyframe(ms(10 + weave_frames), tuple(pin_pos), True, False),
        Keyframe(ms(10 + weave_frames + 10), tuple(pin_pos), False, False),
        Keyframe(ms(10 + weave_frames + settle_frames), tuple(pin_pos), False, False),
    ]

    # right hand: grab the last bead and thread the waypoints at constant
    # speed, pausing at dwell markers
    segments: list[tuple[np.ndarray, float]] = []  # (target, length or dwell flag)
    prev = np.asarray(bead_last, dtype=float)
    dwell_count = 0
    for w in waypoints:
        if w is None:
            segments.append((prev, -1.0))
            dwell_count += 1
            continue
        point = np.asarray(w, dtype=float)
        segments.append((point, float(np.linalg.norm(point - prev))))
        prev = point
    total = sum(length for _, length in segments if length > 0)
    move_frames = weave_frames - dwell_count * DWELL_FRAMES

    right = [
        Keyframe(ms(0), tuple(bead_last), False, False),
        Keyframe(ms(10), tuple(bead_last), True, False),
    ]
    frame = 10.0
    for point, length in segments:
        frame += DWELL_FRAMES if length < 0 else move_frames * length / total
        right.append(Keyframe(ms(frame), tuple(point), True, False))
    last = segments[-1][0]
    right.append(Keyframe(ms(10 + weave_frames + 100), tuple(last), True, False))
    right.append(Keyframe(ms(10 + weave_frames + 110), tuple(last), False, False))
    right.append(Keyframe(ms(10 + weave_frames + settle_frames), tuple(last), False, False))
    return AgentPlan(left, right)
