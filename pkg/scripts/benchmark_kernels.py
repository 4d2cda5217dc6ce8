#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-numpy fallback.

Runs the physics hot loop (track_loop via controller.track) and the
quaternion kernels in the current interpreter, then re-launches itself with
SAILX_NUMBA=0 to time the fallback, and prints both tables side by side.

Usage: python3 scripts/benchmark_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def bench_quat(repeat: int) -> float:
    from sailx.kernels import quat_mul, quat_normalize

    rng = np.random.default_rng(0)
    qs = rng.normal(size=(20000, 4))
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        acc = np.array([1.0, 0.0, 0.0, 0.0])
        for q in qs:
            acc = quat_normalize(quat_mul(acc, quat_normalize(q)))
        best = min(best, time.perf_counter() - t0)
    return best


def bench_track(repeat: int) -> float:
    from sailx.controller import ReferenceTrack, gain_profile, track
    from sailx.sim import DynamicsParams, Pose, WorldState

    times = np.linspace(0.0, 4.0, 81)
    positions = np.stack([0.3 * np.sin(times), 0.3 * np.cos(times),
                          0.2 + 0.05 * times], axis=1)
    orientations = np.tile([1.0, 0.0, 0.0, 0.0], (81, 1))
    ref = ReferenceTrack(times, positions, orientations)
    gains = gain_profile("real-exec")
    params = DynamicsParams()
    best = np.inf
    for _ in range(repeat):
        world = WorldState(robot=Pose(positions[0].copy()))
        t0 = time.perf_counter()
        track(world, ref, gains, params, until=4.0)
        best = min(best, time.perf_counter() - t0)
    return best


def run_suite(repeat: int) -> dict:
    from sailx.kernels import NUMBA_ENABLED

    # warm up any compilation before timing
    bench_quat(1)
    bench_track(1)
    return {"numba": NUMBA_ENABLED,
            "quat_chain_20k": bench_quat(repeat),
            "track_4s_loop": bench_track(repeat)}


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--emit-json", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    mine = run_suite(args.repeat)
    if args.emit_json:
        print(json.dumps(mine))
        return 0

    env = dict(os.environ,
               SAILX_NUMBA="0" if mine["numba"] else "1")
    other = json.loads(subprocess.check_output(
        [sys.executable, os.path.abspath(__file__),
         "--repeat", str(args.repeat), "--emit-json"],
        env=env).decode())
    fast, slow = (mine, other) if mine["numba"] else (other, mine)
    print(f"{'benchmark':<18}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>9}")
    for key in ("quat_chain_20k", "track_4s_loop"):
        ratio = slow[key] / fast[key]
        print(f"{key:<18}{fast[key]:>12.4f}{slow[key]:>12.4f}{ratio:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
