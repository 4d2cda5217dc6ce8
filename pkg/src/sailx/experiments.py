"""Experiment drivers: method presets, replay harness, sweeps, diagnostics.

Every driver is deterministic for a fixed seed: per-trial seeds derive from
the root seed by simple arithmetic, results keep trial order, and the CSV
writer formats floats reproducibly.
"""
from __future__ import annotations

import csv
import io as _stdio
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import AggregatedActionsPolicy
from .controller import GAIN_PRESETS, ReferenceTrack, track
from .core import Pose, IDENTITY_QUAT
from .diagnostics import SampleSet, knn_distance, kde_score, mmd
from .errors import InvalidInputError
from .io import generate_demos
from .metrics import MetricReport, SparcParams, aggregate
from .policy import MockPolicy, PolicyConfig, infer_unconditional
from .scheduler import ExecutorConfig, RolloutLog, run_rollout
from .sim import DynamicsParams, TaskSpec, WorldState, initial_world, success

METHODS = ("sail", "dp", "dp-fast", "agg-actions", "replay")

DEFAULT_OBJECT = np.array([0.3, 0.0, 0.02])
DEFAULT_GOAL = np.array([0.3, 0.25, 0.02])


def make_task(object_position=None, goal_position=None, **kwargs) -> TaskSpec:
    """The standard desk-scale pick-and-place task."""
    obj = DEFAULT_OBJECT if object_position is None else np.asarray(object_position)
    goal = DEFAULT_GOAL if goal_position is None else np.asarray(goal_position)
    return TaskSpec(object_start=Pose(obj.astype(float), IDENTITY_QUAT.copy()),
                    goal_position=goal.astype(float), **kwargs)


def build_demo_corpus(n: int = 50, seed: int = 0, task: TaskSpec | None = None):
    """Generate the demo corpus used by all experiments."""
    return generate_demos(task or make_task(), n=n, seed=seed)


@dataclass(frozen=True)
class MethodSetup:
    policy_config: PolicyConfig
    exec_config: ExecutorConfig
    gains: str
    policy_class: type = MockPolicy


def method_setup(method: str, c: float = 1.0, *, use_eag: bool | None = None,
                 noise_sigma: float = 0.002, p_branch: float = 0.2) -> MethodSetup:
    """Map a named method onto policy/executor/controller settings.

    sail: high-gain controller, reached-pose targets, adaptive speed with
    error-adaptive guidance. dp: the unsped baseline (always c = 1), low
    gain, commanded targets, no guidance. dp-fast: dp naively sped up to c.
    agg-actions: dp-fast drawing delta-aggregated chunks. replay is handled
    by replay_rollout, not here.
    """
    if method == "sail":
        pc = PolicyConfig(noise_sigma=noise_sigma, p_branch=p_branch,
                          target_mode="reached")
        ec = ExecutorConfig(adaptive_speed=True, c_slow=max(c, 0.5), c_fast=c,
                            use_eag=True if use_eag is None else use_eag)
        return MethodSetup(pc, ec, "real-exec")
    if method in ("dp", "dp-fast", "agg-actions"):
        fixed = 1.0 if method == "dp" else c
        pc = PolicyConfig(noise_sigma=noise_sigma, p_branch=p_branch,
                          target_mode="commanded")
        ec = ExecutorConfig(adaptive_speed=False, fixed_c=fixed,
                            use_eag=False if use_eag is None else use_eag)
        cls = AggregatedActionsPolicy if method == "agg-actions" else MockPolicy
        return MethodSetup(pc, ec, "real-demo", cls)
    raise InvalidInputError(f"unknown method: {method}")


def task_for_demo(demo) -> TaskSpec:
    return TaskSpec(object_start=Pose(demo.object_start[:3].copy(),
                                      demo.object_start[3:7].copy()),
                    goal_position=demo.goal.copy())


def run_method_rollout(method: str, c: float, demos, seed: int,
                       dynamics: DynamicsParams | None = None,
                       **setup_kwargs) -> RolloutLog:
    """One closed-loop rollout of a named method on a demo-aligned task."""
    if method == "replay":
        return replay_rollout(demos[seed % len(demos)], c=c, seed=seed,
                              dynamics=dynamics)
    setup = method_setup(method, c, **setup_kwargs)
    demo = demos[seed % len(demos)]
    task = task_for_demo(demo)
    start = Pose(demo.reached[0, :3].copy(), demo.reached[0, 3:7].copy())
    policy = setup.policy_class(demos, setup.policy_config, seed=seed)
    return run_rollout(policy, task, setup.exec_config,
                       GAIN_PRESETS[setup.gains], dynamics or DynamicsParams(),
                       start, seed=seed)


def replay_rollout(demo, c: float = 1.0, gains: str = "real-exec",
                   target: str = "reached", noise_scale: float = 0.0,
                   seed: int = 0,
                   dynamics: DynamicsParams | None = None) -> RolloutLog:
    """Open-loop replay of one demo, sped up by 1/c, as a RolloutLog.

    The commanded or reached stream is rescheduled at interval c * dt and
    tracked with the requested controller gains; optional Gaussian noise
    perturbs the reference positions before tracking.
    """
    stream = demo.reached if target == "reached" else demo.commanded
    positions = stream[:, :3].copy()
    orientations = stream[:, 3:7].copy()
    if noise_scale > 0.0:
        rng = np.random.default_rng((seed, 77))
        positions = positions + rng.normal(0.0, noise_scale, positions.shape)
    times = np.arange(len(stream)) * (c * demo.dt)
    ref = ReferenceTrack(times, positions, orientations,
                         grippers=demo.grippers.copy(),
                         flags=demo.k.copy())
    task = task_for_demo(demo)
    world = initial_world(Pose(stream[0, :3].copy(), stream[0, 3:7].copy()),
                          task)
    world, trace = track(world, ref, GAIN_PRESETS[gains],
                         dynamics or DynamicsParams(),
                         until=float(times[-1]) + 0.5,
                         grasp_radius=task.grasp_radius)
    ok = success(world, task)
    events = [(float(trace.times[i]), "grasp" if trace.events[i] > 0
               else "release") for i in np.nonzero(trace.events)[0]]
    stride = 10
    rp, _, rq, _, _ = ref.sample(trace.times[::stride])
    return RolloutLog(success=ok, duration=float(times[-1]) if ok else task.t_max,
                      stall_count=0, con_values=[], wed_values=[],
                      times=trace.times[::stride],
                      positions=trace.positions[::stride],
                      orientations=trace.orientations[::stride],
                      ref_positions=rp, ref_orientations=rq,
                      e_pos=trace.e_pos[::stride], e_ori=trace.e_ori[::stride],
                      events=events, chunks=[], guidance=[], seed=seed)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _trial_seed(seed: int, cell: int, trial: int) -> int:
    return seed * 1_000_003 + cell * 1_009 + trial


_POOL_DEMOS = None


def _pool_init(demos):
    global _POOL_DEMOS
    _POOL_DEMOS = demos


def _pool_rollout(args):
    method, c, seed, kwargs = args
    return run_method_rollout(method, c, _POOL_DEMOS, seed, **kwargs)


def _run_cell(method, c, demos, seeds, jobs, **kwargs):
    if jobs <= 1:
        return [run_method_rollout(method, c, demos, s, **kwargs)
                for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_pool_init,
                             initargs=(demos,)) as pool:
        return list(pool.map(_pool_rollout,
                             [(method, c, s, kwargs) for s in seeds]))


def sweep_speed(demos, methods=("sail", "dp-fast"), c_values=(1.0, 0.5, 0.33, 0.2, 0.1),
                trials: int = 20, seed: int = 0, jobs: int = 1,
                t_max: float = 30.0) -> list[dict]:
    """Success/throughput metrics per (method, speedup) grid point."""
    mean_demo = float(np.mean([d.duration for d in demos]))
    rows = []
    for cell, (method, c) in enumerate((m, c) for m in methods for c in c_values):
        seeds = [_trial_seed(seed, cell, t) for t in range(trials)]
        logs = _run_cell(method, c, demos, seeds, jobs)
        report = aggregate(logs, t_max=t_max, mean_demo_duration=mean_demo)
        rows.append({"method": method, "c": c, **report.as_row()})
    return rows


def sweep_gain_replay(demos, c_values=(1.0, 0.5, 0.33, 0.2),
                      gains=("high", "low"),
                      targets=("reached", "commanded"),
                      seed: int = 0) -> list[dict]:
    """Replay SR for every (gain, target stream, speedup) combination."""
    rows = []
    for gain in gains:
        for target in targets:
            for c in c_values:
                logs = [replay_rollout(d, c=c, gains=gain, target=target,
                                       seed=seed + i)
                        for i, d in enumerate(demos)]
                sr = float(np.mean([l.success for l in logs]))
                rows.append({"gain": gain, "target": target, "c": c,
                             "n": len(logs), "sr": sr})
    return rows


def sweep_noise(demos, scales=(0.0, 0.002, 0.005, 0.01),
                gains=("high", "low"), trials: int = 100,
                seed: int = 0) -> list[dict]:
    """Replay SR under reference noise for high vs low controller gains."""
    rows = []
    for gain in gains:
        for cell, scale in enumerate(scales):
            logs = [replay_rollout(demos[t % len(demos)], c=1.0, gains=gain,
                                   target="reached", noise_scale=scale,
                                   seed=_trial_seed(seed, cell, t))
                    for t in range(trials)]
            sr = float(np.mean([l.success for l in logs]))
            rows.append({"gain": gain, "noise": scale, "n": trials, "sr": sr})
    return rows


# ---------------------------------------------------------------------------
# diagnostics trials
# ---------------------------------------------------------------------------

def diagnostics_trial(demos, policy: MockPolicy, c: float, seed: int,
                      dynamics: DynamicsParams | None = None) -> dict:
    """One single-step reset trial: track one sped-up cycle, score the tail.

    The robot is reset onto a random demo state, tracks the next stretch of
    that demo rescheduled at interval c * dt for one inference latency, and
    the conditioning tail it would hand to the policy (the positions it will
    traverse next at speed c) is scored against N unconditional draws.
    """
    rng = np.random.default_rng((seed, 11))
    cfg = policy.config
    demo = demos[int(rng.integers(0, len(demos)))]
    n = len(demo)
    stride = max(1, int(round(1.0 / c)))
    horizon = int(round(0.4 / (c * demo.dt)))
    step = int(rng.integers(5, n - horizon - cfg.h_c * stride - 1))

    start = Pose(demo.reached[step, :3].copy(), demo.reached[step, 3:7].copy())
    task = task_for_demo(demo)
    world = initial_world(start, task)
    idx = np.arange(step, step + horizon + 1)
    times = world.sim_time + np.arange(len(idx)) * (c * demo.dt)
    ref = ReferenceTrack(times, demo.reached[idx, :3].copy(),
                         demo.reached[idx, 3:7].copy(),
                         grippers=demo.grippers[idx].copy())
    world, _ = track(world, ref, GAIN_PRESETS["real-exec"],
                     dynamics or DynamicsParams(), until=float(times[-1]))
    desired = ref.pose_at(float(times[-1]))
    e_pos = float(np.linalg.norm(desired.position - world.robot.position))

    # the tail that will be handed to the policy: the positions traversed
    # next at speed c, anchored at the retrieval match for the current state
    dists = policy._state_distances(world)
    match = min((float(np.min(d)), i, int(np.argmin(d)))
                for i, d in enumerate(dists))
    src = policy._out_pos[match[1]]
    tail_idx = np.minimum(match[2] + 1 + stride * np.arange(cfg.h_c),
                          len(src) - 1)
    query = src[tail_idx].reshape(-1)
    chunks = [infer_unconditional(policy, world) for _ in range(64)]
    samples = SampleSet.from_chunks(chunks, cfg.h_c)
    return {"c": c, "e_pos": e_pos,
            "knn": knn_distance(samples, query),
            "kde": kde_score(samples, query),
            "mmd": mmd(samples, query)}


def run_diagnostics(demos, c_values=(1.0, 0.33, 0.2), trials: int = 200,
                    seed: int = 0) -> list[dict]:
    """Pooled single-step reset trials across speedup factors."""
    pc = PolicyConfig(noise_sigma=0.002, p_branch=1.0, target_mode="reached")
    rows = []
    for t in range(trials):
        c = c_values[t % len(c_values)]
        policy = MockPolicy(demos, pc, seed=_trial_seed(seed, 7, t))
        rows.append({"trial": t,
                     **diagnostics_trial(demos, policy, c,
                                         _trial_seed(seed, 13, t))})
    return rows


def spearman(x, y) -> float:
    """Spearman rank correlation of two equal-length sequences."""
    from scipy.stats import spearmanr
    return float(spearmanr(x, y).statistic)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(row.get(k)) for k in header])
    return buf.getvalue()


def write_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
