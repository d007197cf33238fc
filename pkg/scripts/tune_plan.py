#!/usr/bin/env python3
"""Offline plan tuning: replay an agent plan through the exact server tick
logic (gesture engine + command application + MD advance) without sockets,
and report the oracle classification over time."""

import argparse
import time

import numpy as np

from pinchmd.agent import FRAME_MS, KNOT_INTEGRATOR, REFERENCE_SEED, make_reference_plan, plan_hand_inputs
from pinchmd.engine import (
    GrabForce,
    IntegratorConfig,
    advance,
    build_chain,
    initial_state,
    nearest_atom,
    world_to_sim,
    zigzag_positions,
)
from pinchmd.geometry import Similarity
from pinchmd.gestures import (
    GestureState,
    GrabBegin,
    GrabEnd,
    GrabUpdate,
    TransformBegin,
    TransformEnd,
    TransformUpdate,
    gesture_step,
)
from pinchmd.knots import classify_chain
from pinchmd.localization import HandSide, zero_offset
from pinchmd.world_transform import HandsCoincidentError, transform_begin, transform_update


def run_plan(plan, frames, check_every=500, steps_per_frame=10, seed=REFERENCE_SEED, verbose=True):
    top = build_chain(50)
    state = initial_state(top, zigzag_positions(50))
    cfg = IntegratorConfig(rng_seed=seed, **KNOT_INTEGRATOR)
    gesture = GestureState()
    offsets = (zero_offset(HandSide.LEFT), zero_offset(HandSide.RIGHT))
    transform = Similarity.identity()
    grabs = {}
    session = None
    reports = []
    for frame in range(1, frames + 1):
        t_ms = int(frame * FRAME_MS)
        left, right = plan_hand_inputs(plan, t_ms)
        _, commands = gesture_step(gesture, left, right, offsets)
        for cmd in commands:
            if isinstance(cmd, GrabBegin):
                p = world_to_sim(np.array(cmd.pinch_point), transform)
                grabs[cmd.hand] = GrabForce(nearest_atom(state.positions, p), p)
            elif isinstance(cmd, GrabUpdate):
                if cmd.hand in grabs:
                    grabs[cmd.hand].target = world_to_sim(np.array(cmd.pinch_point), transform)
            elif isinstance(cmd, GrabEnd):
                grabs.pop(cmd.hand, None)
            elif isinstance(cmd, (TransformBegin, TransformUpdate)):
                a, b = np.array(cmd.left_point), np.array(cmd.right_point)
                if session is None:
                    try:
                        session = transform_begin(a, b, transform)
                    except HandsCoincidentError:
                        session = None
                elif isinstance(cmd, TransformUpdate):
                    transform = transform_update(session, a, b)
            elif isinstance(cmd, TransformEnd):
                session = None
        grab_list = [grabs[h] for h in sorted(grabs, key=lambda h: h.value)]
        state = advance(state, top, grab_list, cfg, steps_per_frame)
        if frame % check_every == 0:
            rep = classify_chain(state.positions)
            reports.append((frame, rep))
            if verbose:
                print(f"frame {frame:6d}: det={rep.determinant} cross={rep.crossings_after_reduction} "
                      f"{rep.classification.value} grabs={sorted(h.value for h in grabs)}")
    return state, reports


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--weave-frames", type=int, default=6000)
    ap.add_argument("--frames", type=int, default=6600)
    ap.add_argument("--check-every", type=int, default=500)
    args = ap.parse_args()

    plan = make_reference_plan(weave_frames=args.weave_frames)
    t0 = time.perf_counter()
    state, reports = run_plan(plan, args.frames, args.check_every)
    print(f"elapsed {time.perf_counter()-t0:.1f}s")
    final = classify_chain(state.positions)
    print(f"final: det={final.determinant} class={final.classification.value}")
