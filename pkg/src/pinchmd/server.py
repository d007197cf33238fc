"""Real-time multi-client interactive MD server.

One asyncio event loop owns everything: connection handlers decode inputs
into a latest-wins per-hand inbox, and a tick task runs the gesture engine,
applies the resulting commands, advances the simulation, and broadcasts one
identical frame payload to every connected client.  Hands are granted
first-claim-wins; a disconnect opens that hand's circuits immediately so
orphaned grabs end within one tick.

``lockstep=True`` gates each tick on fresh input from every claimed hand
instead of the wall clock.  That mode exists for harnesses: it makes whole
networked runs bit-reproducible and lets them run far faster than real time.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from .engine import (
    GrabForce,
    IntegratorConfig,
    SimulationBlowupError,
    Topology,
    advance,
    build_chain,
    compute_forces,
    initial_state,
    nearest_atom,
    world_to_sim,
    zigzag_positions,
)
from .engine.simulation import DEFAULT_GRAB_FMAX, DEFAULT_GRAB_STIFFNESS, SimState, kinetic_energy
from .geometry import Pose, Similarity, vec3
from .gestures import (
    DEFAULT_DEBOUNCE_MS,
    GestureState,
    GrabBegin,
    GrabEnd,
    GrabUpdate,
    HandInput,
    TransformBegin,
    TransformEnd,
    TransformUpdate,
    gesture_step,
    release_hand,
)
from .localization import HandSide, PinchOffset, zero_offset
from .protocol import (
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

logger = logging.getLogger("pinchmd.server")

HANDSHAKE_TIMEOUT_S = 10.0
LOCKSTEP_TIMEOUT_S = 5.0
SEND_QUEUE_FRAMES = 240


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    frame_rate_hz: float = 30.0
    sim_steps_per_frame: int = 10
    topology: Topology | None = None
    initial_positions: np.ndarray | None = None
    offsets: dict[HandSide, PinchOffset] = field(default_factory=dict)
    integrator: IntegratorConfig = field(
        default_factory=lambda: IntegratorConfig(
            dt=0.005, thermostat="langevin", temperature=0.1, friction=1.0, rng_seed=0
        )
    )
    debounce_ms: int = DEFAULT_DEBOUNCE_MS
    grab_stiffness: float = DEFAULT_GRAB_STIFFNESS
    grab_f_max: float = DEFAULT_GRAB_FMAX
    lockstep: bool = False
    checkpoint_interval_frames: int = 0  # 0: derive from the frame rate


@dataclass
class _Client:
    name: str
    hands: tuple[HandSide, ...]
    queue: asyncio.Queue


class ImdServer:
    def __init__(self, config: ServerConfig | None = None):
        self.config = config or ServerConfig()
        self.topology = self.config.topology or build_chain(50)
        positions = (
            self.config.initial_positions
            if self.config.initial_positions is not None
            else zigzag_positions(self.topology.n_atoms)
        )
        self.state = initial_state(self.topology, positions)
        self.transform = Similarity.identity()
        self.gesture = GestureState()
        self.grabs: dict[HandSide, GrabForce] = {}
        self.session = None  # active TransformSession
        self.frame_id = 0
        self.offsets = {
            HandSide.LEFT: self.config.offsets.get(HandSide.LEFT, zero_offset(HandSide.LEFT)),
            HandSide.RIGHT: self.config.offsets.get(HandSide.RIGHT, zero_offset(HandSide.RIGHT)),
        }
        for side, off in self.offsets.items():
            if np.allclose(off.offset, 0.0):
                logger.warning(
                    "%s hand uses the default zero pinch offset; load a calibration", side.value
                )
        self._checkpoint = self._snapshot_checkpoint()
        self._clients: dict[object, _Client] = {}
        self._hand_owner: dict[HandSide, object | None] = {h: None for h in HandSide}
        self._inbox: dict[HandSide, HandInput | None] = {h: None for h in HandSide}
        self._fresh: set[HandSide] = set()
        self._pending_release: list[HandSide] = []
        self._input_event = asyncio.Event()
        self._server = None
        self._tick_task = None
        self._stopped = asyncio.Event()
        cadence = self.config.checkpoint_interval_frames
        if cadence <= 0:
            cadence = max(1, round(self.config.frame_rate_hz)) if self.config.frame_rate_hz > 0 else 30
        self._checkpoint_every = cadence

    # --- lifecycle --------------------------------------------------------

    async def start(self) -> None:
        self._server = await ws_serve(
            self._handler, self.config.host, self.config.port, max_size=2**22
        )
        self._tick_task = asyncio.create_task(self._tick_loop(), name="pinchmd-tick")
        logger.info("serving on %s:%d", self.config.host, self.port)

    @property
    def port(self) -> int:
        assert self._server is not None, "server not started"
        return self._server.sockets[0].getsockname()[1]

    @property
    def url(self) -> str:
        return f"ws://{self.config.host}:{self.port}"

    async def stop(self) -> None:
        if self._tick_task:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        if self._server:
            self._server.close()
            await self._server.wait_closed()
        self._stopped.set()

    async def serve_forever(self) -> None:
        await self.start()
        try:
            await asyncio.get_running_loop().create_future()
        finally:
            await self.stop()

    # --- connection handling ------------------------------------------------

    async def _handler(self, ws) -> None:
        try:
            raw = await asyncio.wait_for(ws.recv(), timeout=HANDSHAKE_TIMEOUT_S)
        except (asyncio.TimeoutError, ConnectionClosed):
            return
        try:
            hello = decode_message(raw)
        except ProtocolError as exc:
            await self._send_safe(ws, ErrorMsg("MALFORMED", str(exc)))
            return
        if not isinstance(hello, Hello):
            await self._send_safe(ws, ErrorMsg("MALFORMED", "expected hello"))
            return
        if hello.version != PROTOCOL_VERSION:
            await self._send_safe(
                ws, ErrorMsg("VERSION", f"server speaks version {PROTOCOL_VERSION}")
            )
            return

        granted: list[HandSide] = []
        for hand in hello.hands:
            if self._hand_owner[hand] is not None:
                await self._send_safe(ws, ErrorMsg("HAND_TAKEN", hand.value))
            else:
                self._hand_owner[hand] = ws
                granted.append(hand)

        client = _Client(hello.name, tuple(granted), asyncio.Queue(maxsize=SEND_QUEUE_FRAMES))
        self._clients[ws] = client
        await self._send_safe(
            ws,
            Welcome(
                json.dumps(topology_sections(self.topology), separators=(",", ":")),
                int(round(self.config.frame_rate_hz)),
            ),
        )
        sender = asyncio.create_task(self._sender(ws, client))
        try:
            async for raw in ws:
                self._on_message(ws, client, raw)
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            self._clients.pop(ws, None)
            for hand in client.hands:
                if self._hand_owner.get(hand) is ws:
                    self._hand_owner[hand] = None
                    self._inbox[hand] = None  # drop stale circuit state
                    self._pending_release.append(hand)
            self._input_event.set()  # unblock a lockstep tick waiting on this hand

    def _on_message(self, ws, client: _Client, raw) -> None:
        try:
            msg = decode_message(raw)
        except ProtocolError as exc:
            self._queue_to(client, ErrorMsg("MALFORMED", str(exc)))
            return
        if isinstance(msg, InputState):
            if msg.hand not in client.hands:
                self._queue_to(client, ErrorMsg("MALFORMED", f"hand {msg.hand.value} not owned"))
                return
            self._inbox[msg.hand] = msg.to_hand_input()
            self._fresh.add(msg.hand)
            self._input_event.set()
        else:
            self._queue_to(client, ErrorMsg("MALFORMED", f"unexpected {type(msg).__name__}"))

    async def _sender(self, ws, client: _Client) -> None:
        try:
            while True:
                payload = await client.queue.get()
                await ws.send(payload)
        except (ConnectionClosed, asyncio.CancelledError):
            pass

    def _queue_to(self, client: _Client, msg) -> None:
        try:
            client.queue.put_nowait(encode_message(msg))
        except asyncio.QueueFull:
            logger.warning("dropping client %s: send queue overflow", client.name)

    async def _send_safe(self, ws, msg) -> None:
        try:
            await ws.send(encode_message(msg))
        except ConnectionClosed:
            pass

    # --- simulation tick ----------------------------------------------------

    def _owned_hands(self) -> set[HandSide]:
        return {h for h, owner in self._hand_owner.items() if owner is not None}

    async def _tick_loop(self) -> None:
        rate = self.config.frame_rate_hz
        period = 1.0 / rate if rate > 0 else 0.0
        loop = asyncio.get_running_loop()
        next_deadline = loop.time() + period
        while True:
            if self.config.lockstep:
                await self._await_lockstep_inputs()
            payloads = self._tick_once()
            self._broadcast(payloads)
            if self.config.lockstep or period == 0.0:
                await asyncio.sleep(0)  # let IO run between ticks
            else:
                now = loop.time()
                delay = next_deadline - now
                if delay > 0:
                    await asyncio.sleep(delay)
                    next_deadline += period
                else:
                    # behind schedule: skip ahead without bursting
                    next_deadline = now + period
                    await asyncio.sleep(0)

    async def _await_lockstep_inputs(self) -> None:
        while True:
            owned = self._owned_hands()
            if owned and owned.issubset(self._fresh):
                return
            self._input_event.clear()
            try:
                await asyncio.wait_for(self._input_event.wait(), timeout=LOCKSTEP_TIMEOUT_S)
            except asyncio.TimeoutError:
                return  # do not stall forever on a dead client

    def _synthetic_input(self, hand: HandSide) -> HandInput:
        prev = self.gesture.hand(hand).last_t
        return HandInput(
            hand, Pose(position=vec3(0, 0, 0)), False, False, prev if prev is not None else 0
        )

    def _tick_once(self) -> list[str]:
        commands = []
        while self._pending_release:
            commands.extend(release_hand(self.gesture, self._pending_release.pop(0)))
        left = self._inbox[HandSide.LEFT] or self._synthetic_input(HandSide.LEFT)
        right = self._inbox[HandSide.RIGHT] or self._synthetic_input(HandSide.RIGHT)
        self._fresh.clear()
        _, step_commands = gesture_step(
            self.gesture,
            left,
            right,
            (self.offsets[HandSide.LEFT], self.offsets[HandSide.RIGHT]),
            self.config.debounce_ms,
        )
        commands.extend(step_commands)
        for cmd in commands:
            self._apply_command(cmd)

        sim_reset = False
        try:
            self.state = advance(
                self.state,
                self.topology,
                self._grab_list(),
                self.config.integrator,
                self.config.sim_steps_per_frame,
            )
        except SimulationBlowupError as exc:
            logger.error("simulation blow-up at step %d; restoring checkpoint", exc.step)
            self._restore_checkpoint()
            sim_reset = True

        self.frame_id += 1
        if not sim_reset and self.frame_id % self._checkpoint_every == 0:
            self._checkpoint = self._snapshot_checkpoint()

        frame = Frame(
            frame_id=self.frame_id,
            sim_time=self.state.time,
            positions=tuple(tuple(float(v) for v in p) for p in self.state.positions),
            potential_energy=self.state.potential_energy,
            kinetic_energy=self.state.kinetic_energy,
            transform=TransformData.from_similarity(self.transform),
            grabs=tuple(
                GrabInfo(hand, g.atom, tuple(float(v) for v in g.target))
                for hand, g in sorted(self.grabs.items(), key=lambda kv: kv[0].value)
            ),
        )
        payload = encode_message(frame)
        if sim_reset:
            return [encode_message(ErrorMsg("SIM_RESET", "restored last checkpoint")), payload]
        return [payload]

    def _grab_list(self) -> list[GrabForce]:
        return [self.grabs[h] for h in sorted(self.grabs, key=lambda h: h.value)]

    def _apply_command(self, cmd) -> None:
        from .world_transform import HandsCoincidentError, transform_begin, transform_update

        match cmd:
            case GrabBegin(hand, point):
                p_sim = world_to_sim(np.array(point), self.transform)
                atom = nearest_atom(self.state.positions, p_sim)
                self.grabs[hand] = GrabForce(
                    atom, p_sim, self.config.grab_stiffness, self.config.grab_f_max
                )
            case GrabUpdate(hand, point):
                grab = self.grabs.get(hand)
                if grab is not None:
                    grab.target = world_to_sim(np.array(point), self.transform)
            case GrabEnd(hand):
                self.grabs.pop(hand, None)
            case TransformBegin(a, b) | TransformUpdate(a, b) if self.session is None:
                try:
                    self.session = transform_begin(np.array(a), np.array(b), self.transform)
                except HandsCoincidentError:
                    self.session = None  # retried on the next update
            case TransformUpdate(a, b):
                self.transform = transform_update(self.session, np.array(a), np.array(b))
            case TransformEnd():
                self.session = None

    def _broadcast(self, payloads: list[str]) -> None:
        for part in payloads:
            for client in self._clients.values():
                try:
                    client.queue.put_nowait(part)
                except asyncio.QueueFull:
                    logger.warning("client %s lagging; dropping frame", client.name)

    # --- checkpointing ------------------------------------------------------

    def _snapshot_checkpoint(self):
        return (
            self.state.positions.copy(),
            self.state.velocities.copy(),
            self.state.step,
            self.state.time,
        )

    def _restore_checkpoint(self) -> None:
        positions, velocities, step, time = self._checkpoint
        forces, pe = compute_forces(self.topology, positions, self._grab_list())
        self.state = SimState(
            positions=positions.copy(),
            velocities=velocities.copy(),
            forces=forces,
            potential_energy=pe,
            kinetic_energy=kinetic_energy(self.topology.masses, velocities),
            time=time,
            step=step,
        )


def run_server(config: ServerConfig) -> None:
    """Blocking entry point used by the CLI."""

    async def main():
        server = ImdServer(config)
        await server.start()
        stop = asyncio.get_running_loop().create_future()
        try:
            import signal

            asyncio.get_running_loop().add_signal_handler(signal.SIGINT, stop.cancel)
            asyncio.get_running_loop().add_signal_handler(signal.SIGTERM, stop.cancel)
        except (NotImplementedError, RuntimeError):
            pass
        try:
            await stop
        except asyncio.CancelledError:
            pass
        finally:
            await server.stop()

    asyncio.run(main())
