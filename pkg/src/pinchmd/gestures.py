"""Deterministic gesture state machine for two-circuit pinch gloves.

Each hand reports a tracker pose plus two binary circuits: thumb-index
("index pinch") and thumb-middle ("middle pinch").  Raw circuit changes are
debounced, then mapped to interaction sessions:

* an index pinch opens a single-hand grab session (a pulling force on one
  atom, owned by the physics server);
* both hands' middle pinches held together open a two-hand transform session
  (scale/rotate of the world mapping).

A transform suspends grabs: active grabs end the moment a transform begins,
and a fresh index rising edge after the transform is required to grab again.
The step function is a pure function of (state, inputs, config), which is
what makes recorded sessions replay to byte-identical command lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Pose
from .localization import HandSide, PinchOffset, pinch_point

DEFAULT_DEBOUNCE_MS = 20


@dataclass
class HandInput:
    """One glove sample: pose, the two circuit states, and a timestamp."""

    hand: HandSide
    pose: Pose
    pinch_index: bool
    pinch_middle: bool
    timestamp: int  # monotonic milliseconds


# Commands are immutable; Begin/End strictly alternate per session kind.

@dataclass(frozen=True)
class GrabBegin:
    hand: HandSide
    pinch_point: tuple[float, float, float]


@dataclass(frozen=True)
class GrabUpdate:
    hand: HandSide
    pinch_point: tuple[float, float, float]


@dataclass(frozen=True)
class GrabEnd:
    hand: HandSide


@dataclass(frozen=True)
class TransformBegin:
    left_point: tuple[float, float, float]
    right_point: tuple[float, float, float]


@dataclass(frozen=True)
class TransformUpdate:
    left_point: tuple[float, float, float]
    right_point: tuple[float, float, float]


@dataclass(frozen=True)
class TransformEnd:
    pass


GestureCommand = GrabBegin | GrabUpdate | GrabEnd | TransformBegin | TransformUpdate | TransformEnd


@dataclass
class _Circuit:
    raw: bool = False
    raw_since: int = 0  # timestamp at which the current raw value appeared
    value: bool = False  # debounced

    def update(self, raw: bool, t: int, debounce_ms: int) -> None:
        if raw != self.raw:
            self.raw = raw
            self.raw_since = t
        if self.value != self.raw and t - self.raw_since >= debounce_ms:
            self.value = self.raw


@dataclass
class _HandState:
    index: _Circuit = field(default_factory=_Circuit)
    middle: _Circuit = field(default_factory=_Circuit)
    last_t: int | None = None
    grab_active: bool = False


@dataclass
class GestureState:
    left: _HandState = field(default_factory=_HandState)
    right: _HandState = field(default_factory=_HandState)
    transform_active: bool = False
    timestamp_clamps: int = 0  # diagnostics: malformed (decreasing) timestamps seen

    def hand(self, side: HandSide) -> _HandState:
        return self.left if side is HandSide.LEFT else self.right


def _point(inp: HandInput, offset: PinchOffset) -> tuple[float, float, float]:
    p = pinch_point(inp.pose, offset)
    return (float(p[0]), float(p[1]), float(p[2]))


def gesture_step(
    state: GestureState,
    left: HandInput,
    right: HandInput,
    offsets: tuple[PinchOffset, PinchOffset],
    debounce_ms: int = DEFAULT_DEBOUNCE_MS,
) -> tuple[GestureState, list[GestureCommand]]:
    """Advance the state machine by one sample pair, emitting commands.

    *offsets* is the (left, right) pair of calibrated pinch offsets.
    The state object is updated in place and returned for convenience.
    """
    commands: list[GestureCommand] = []
    inputs = {HandSide.LEFT: left, HandSide.RIGHT: right}
    points: dict[HandSide, tuple[float, float, float]] = {}
    prev_index: dict[HandSide, bool] = {}

    for side, offset in zip((HandSide.LEFT, HandSide.RIGHT), offsets):
        inp = inputs[side]
        if inp.hand is not side:
            raise ValueError(f"expected {side} input, got {inp.hand}")
        hs = state.hand(side)
        t = inp.timestamp
        if hs.last_t is not None and t < hs.last_t:
            t = hs.last_t  # clamp malformed timestamp, count it
            state.timestamp_clamps += 1
        hs.last_t = t
        prev_index[side] = hs.index.value
        hs.index.update(inp.pinch_index, t, debounce_ms)
        hs.middle.update(inp.pinch_middle, t, debounce_ms)
        points[side] = _point(inp, offset)

    both_middle = state.left.middle.value and state.right.middle.value

    # Transform sessions win over grabs: starting one ends any active grab,
    # and no grab may begin while it runs.
    if not state.transform_active and both_middle:
        for side in (HandSide.LEFT, HandSide.RIGHT):
            hs = state.hand(side)
            if hs.grab_active:
                commands.append(GrabEnd(side))
                hs.grab_active = False
        state.transform_active = True
        commands.append(TransformBegin(points[HandSide.LEFT], points[HandSide.RIGHT]))
    elif state.transform_active and both_middle:
        commands.append(TransformUpdate(points[HandSide.LEFT], points[HandSide.RIGHT]))
    elif state.transform_active:
        state.transform_active = False
        commands.append(TransformEnd())

    for side in (HandSide.LEFT, HandSide.RIGHT):
        hs = state.hand(side)
        if hs.grab_active:
            if hs.index.value:
                commands.append(GrabUpdate(side, points[side]))
            else:
                commands.append(GrabEnd(side))
                hs.grab_active = False
        elif hs.index.value and not prev_index[side] and not state.transform_active:
            # rising edges during a transform are ignored, not queued
            hs.grab_active = True
            commands.append(GrabBegin(side, points[side]))

    return state, commands


def release_hand(state: GestureState, side: HandSide) -> list[GestureCommand]:
    """Treat a hand's circuits as open immediately (client disconnected).

    Bypasses debouncing so orphaned sessions end within the same tick.
    """
    commands: list[GestureCommand] = []
    hs = state.hand(side)
    if hs.grab_active:
        commands.append(GrabEnd(side))
        hs.grab_active = False
    if state.transform_active:
        state.transform_active = False
        commands.append(TransformEnd())
    for circuit in (hs.index, hs.middle):
        circuit.raw = False
        circuit.value = False
        circuit.raw_since = hs.last_t if hs.last_t is not None else 0
    return commands


def replay_inputs(
    stream: list[tuple[HandInput, HandInput]],
    offsets: tuple[PinchOffset, PinchOffset],
    debounce_ms: int = DEFAULT_DEBOUNCE_MS,
) -> list[GestureCommand]:
    """Fold gesture_step over a recorded stream of (left, right) input pairs."""
    state = GestureState()
    commands: list[GestureCommand] = []
    for left, right in stream:
        _, step_commands = gesture_step(state, left, right, offsets, debounce_ms)
        commands.extend(step_commands)
    return commands


def format_command(cmd: GestureCommand) -> str:
    """Canonical one-line form used for golden command lists."""

    def pt(p: tuple[float, float, float]) -> str:
        return ",".join(repr(v) for v in p)

    match cmd:
        case GrabBegin(hand, p):
            return f"GrabBegin {hand.value} {pt(p)}"
        case GrabUpdate(hand, p):
            return f"GrabUpdate {hand.value} {pt(p)}"
        case GrabEnd(hand):
            return f"GrabEnd {hand.value}"
        case TransformBegin(a, b):
            return f"TransformBegin {pt(a)} {pt(b)}"
        case TransformUpdate(a, b):
            return f"TransformUpdate {pt(a)} {pt(b)}"
        case TransformEnd():
            return "TransformEnd"
    raise TypeError(f"unknown command {cmd!r}")


def format_commands(commands: list[GestureCommand]) -> str:
    return "".join(format_command(c) + "\n" for c in commands)
