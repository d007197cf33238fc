"""Simulated clients for latency and reliability measurement.

Spawns N WebSocket clients against a running server and records, per
client: hello-to-first-frame latency, input-to-reflected-grab latency
(send a pinch, wait for the frame whose grab list shows it), frame id
gaps, and decode errors.  This doubles as the long-soak reliability check.
"""

from __future__ import annotations

import asyncio
import time
from dataclasses import dataclass, field

from websockets.asyncio.client import connect
from websockets.exceptions import ConnectionClosed

from .localization import HandSide
from .protocol import (
    PROTOCOL_VERSION,
    ErrorMsg,
    Frame,
    Hello,
    InputState,
    ProtocolError,
    Welcome,
    decode_message,
    encode_message,
)


@dataclass
class ClientStats:
    name: str
    hands: tuple[HandSide, ...]
    frames: int = 0
    frame_gaps: int = 0
    decode_errors: int = 0
    hello_to_first_frame_ms: float | None = None
    grab_latencies_ms: list[float] = field(default_factory=list)
    errors_received: list[str] = field(default_factory=list)
    last_frame_id: int | None = None


@dataclass
class ProbeReport:
    duration_s: float
    clients: list[ClientStats]

    @property
    def total_gaps(self) -> int:
        return sum(c.frame_gaps for c in self.clients)

    @property
    def total_decode_errors(self) -> int:
        return sum(c.decode_errors for c in self.clients)

    def latency_percentiles(self) -> dict[str, float]:
        samples = sorted(x for c in self.clients for x in c.grab_latencies_ms)
        if not samples:
            return {}

        def pct(p: float) -> float:
            k = min(len(samples) - 1, max(0, round(p / 100 * (len(samples) - 1))))
            return samples[k]

        return {"p50": pct(50), "p95": pct(95), "max": samples[-1]}


def _quantize(samples: list[float], p: float) -> float:
    k = min(len(samples) - 1, max(0, round(p / 100 * (len(samples) - 1))))
    return sorted(samples)[k]


async def _probe_client(
    url: str,
    name: str,
    hands: tuple[HandSide, ...],
    duration_s: float,
    stats: ClientStats,
    pinch_period_s: float = 2.0,
) -> None:
    t_hello = time.perf_counter()
    async with connect(url, max_size=2**22) as ws:
        await ws.send(encode_message(Hello(PROTOCOL_VERSION, name, hands)))
        deadline = time.perf_counter() + duration_s
        granted = set(hands)
        input_t = 0
        pinch_sent_at: float | None = None
        pinch_hand: HandSide | None = None
        next_pinch = time.perf_counter() + 0.5
        pinch_until = 0.0
        latest_positions = None

        while time.perf_counter() < deadline:
            timeout = max(0.01, deadline - time.perf_counter())
            try:
                raw = await asyncio.wait_for(ws.recv(), timeout=timeout)
            except asyncio.TimeoutError:
                break
            except ConnectionClosed:
                break
            try:
                msg = decode_message(raw)
            except ProtocolError:
                stats.decode_errors += 1
                continue
            if isinstance(msg, Welcome):
                continue
            if isinstance(msg, ErrorMsg):
                stats.errors_received.append(msg.code)
                if msg.code == "HAND_TAKEN":
                    granted.discard(HandSide.LEFT if msg.detail == "L" else HandSide.RIGHT)
                continue
            if not isinstance(msg, Frame):
                continue

            stats.frames += 1
            if stats.hello_to_first_frame_ms is None:
                stats.hello_to_first_frame_ms = (time.perf_counter() - t_hello) * 1e3
            if stats.last_frame_id is not None and msg.frame_id != stats.last_frame_id + 1:
                stats.frame_gaps += 1
            stats.last_frame_id = msg.frame_id
            latest_positions = msg.positions

            # reflected-grab latency measurement
            if pinch_sent_at is not None:
                if any(g.hand == pinch_hand for g in msg.grabs):
                    stats.grab_latencies_ms.append((time.perf_counter() - pinch_sent_at) * 1e3)
                    pinch_sent_at = None

            now = time.perf_counter()
            if granted and latest_positions is not None:
                hand = next(iter(sorted(granted, key=lambda h: h.value)))
                pinching = now < pinch_until
                if not pinching and now >= next_pinch:
                    pinch_until = now + 0.5
                    next_pinch = now + pinch_period_s
                    pinching = True
                    if pinch_sent_at is None:
                        pinch_sent_at = now
                        pinch_hand = hand
                input_t += 33
                target = latest_positions[0]
                await ws.send(
                    encode_message(
                        InputState(
                            t=input_t,
                            hand=hand,
                            pos=(target[0], target[1], target[2]),
                            rot=(1.0, 0.0, 0.0, 0.0),
                            idx=1 if pinching else 0,
                            mid=0,
                        )
                    )
                )


async def run_probe(
    url: str,
    n_clients: int,
    duration_s: float,
    hands_plan: list[tuple[HandSide, ...]] | None = None,
) -> ProbeReport:
    """Run n simulated clients for duration_s and collect statistics."""
    if hands_plan is None:
        cycle = [(HandSide.LEFT,), (HandSide.RIGHT,)]
        hands_plan = [cycle[i % 2] for i in range(n_clients)]
    stats = [
        ClientStats(name=f"probe-{i}", hands=hands_plan[i]) for i in range(n_clients)
    ]
    t0 = time.perf_counter()
    await asyncio.gather(
        *(
            _probe_client(url, s.name, s.hands, duration_s, s)
            for s in stats
        )
    )
    return ProbeReport(duration_s=time.perf_counter() - t0, clients=stats)


def format_report(report: ProbeReport) -> str:
    lines = [f"duration_s {report.duration_s:.1f}"]
    lines.append(f"clients {len(report.clients)}")
    lines.append(f"frame_gaps {report.total_gaps}")
    lines.append(f"decode_errors {report.total_decode_errors}")
    hello = [c.hello_to_first_frame_ms for c in report.clients if c.hello_to_first_frame_ms]
    if hello:
        lines.append(f"hello_to_first_frame_ms_max {max(hello):.1f}")
    pct = report.latency_percentiles()
    if pct:
        lines.append(
            f"grab_latency_ms p50 {pct['p50']:.1f} p95 {pct['p95']:.1f} max {pct['max']:.1f}"
        )
    for c in report.clients:
        lines.append(
            f"client {c.name} frames {c.frames} gaps {c.frame_gaps} "
            f"decode_errors {c.decode_errors} errors {','.join(c.errors_received) or '-'}"
        )
    return "\n".join(lines) + "\n"
