"""Command-line experiment harness.

Subcommands generate demo corpora, label criticality, run rollouts, and run
the sweep experiments, each emitting CSV suitable for plotting. A plain-text
config file (INI key = value under section headers) can preset any flag;
command-line flags win. SAILX_LOG sets the log level. Exit code 0 means all
requested trials completed (regardless of task success); usage errors exit
with code 2, internal faults with 1.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from configparser import ConfigParser

import numpy as np

from . import experiments as ex
from .baselines import aggregate_actions  # re-exported harness operation
from .errors import SailxError, InvalidInputError
from .io import load_demos, save_demos, write_rollout, read_rollout
from .metrics import aggregate
from .speedmod import label_critical, gripper_event_flags

__all__ = ["main", "aggregate_actions"]

log = logging.getLogger("sailx")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad float list: {text!r}") from e


def _strings(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip() != ""]


def _corpus(args):
    if getattr(args, "demos", None):
        demos = load_demos(args.demos)
        log.info("loaded %d demos from %s", len(demos), args.demos)
        return demos
    log.info("no --demos directory given; generating a fresh corpus")
    return ex.build_demo_corpus(n=50, seed=args.seed)


def _emit(rows, out: str | None) -> None:
    text = ex.rows_to_csv(rows)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_gen_demos(args) -> int:
    demos = ex.build_demo_corpus(n=args.trials, seed=args.seed)
    save_demos(demos, args.out)
    print(f"wrote {len(demos)} demos to {args.out}")
    return 0


def cmd_label(args) -> int:
    demos = _corpus(args)
    rows = []
    for i, d in enumerate(demos):
        dense = label_critical(d.commanded[:, :3])
        grip = gripper_event_flags(d.grippers)
        rows.append({"demo": i, "steps": len(d),
                     "critical": int(np.sum(np.maximum(dense, grip))),
                     "dense": int(np.sum(dense)),
                     "gripper_events": int(np.sum(grip))})
    _emit(rows, args.out)
    return 0


def cmd_rollout(args) -> int:
    demos = _corpus(args)
    exit_code = 0
    for t in range(args.trials):
        seed = args.seed + t
        rollout = ex.run_method_rollout(args.method, args.c, demos, seed)
        print(f"trial {t}: success={rollout.success} "
              f"duration={rollout.duration:.3f}s stalls={rollout.stall_count}")
        if args.out:
            path = args.out if args.trials == 1 else \
                f"{args.out.rsplit('.', 1)[0]}_{t:03d}.jsonl"
            write_rollout(rollout, path)
    return exit_code


def cmd_metrics(args) -> int:
    rollouts = [read_rollout(p) for p in args.inputs]
    report = aggregate(rollouts, t_max=30.0)
    _emit([report.as_row()], args.out)
    return 0


def cmd_diagnose(args) -> int:
    demos = _corpus(args)
    rows = ex.run_diagnostics(demos, c_values=tuple(args.c_values),
                              trials=args.trials, seed=args.seed)
    _emit(rows, args.out)
    return 0


def cmd_sweep_speed(args) -> int:
    demos = _corpus(args)
    for m in args.method:
        if m not in ex.METHODS:
            raise InvalidInputError(f"unknown method: {m}")
    rows = ex.sweep_speed(demos, methods=tuple(args.method),
                          c_values=tuple(args.c_values), trials=args.trials,
                          seed=args.seed, jobs=args.jobs)
    _emit(rows, args.out)
    return 0


def cmd_sweep_gain_replay(args) -> int:
    demos = _corpus(args)
    rows = ex.sweep_gain_replay(demos, c_values=tuple(args.c_values),
                                seed=args.seed)
    _emit(rows, args.out)
    return 0


def cmd_sweep_noise(args) -> int:
    demos = _corpus(args)
    rows = ex.sweep_noise(demos, scales=tuple(args.scales),
                          trials=args.trials, seed=args.seed)
    _emit(rows, args.out)
    return 0


def cmd_report(args) -> int:
    import csv as _csv
    rows = []
    with open(args.inputs[0], newline="") as fh:
        for row in _csv.DictReader(fh):
            rows.append(row)
    if not rows:
        raise InvalidInputError("empty sweep CSV")
    cols = [c for c in ("method", "gain", "target", "c", "noise", "n", "sr",
                        "tpr", "sod", "atr", "sparc") if c in rows[0]]
    widths = {c: max(len(c), *(len(r.get(c, "") or "") for r in rows))
              for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for r in rows:
        print("  ".join((r.get(c, "") or "").ljust(widths[c]) for c in cols))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sailx", description="speed-adaptive execution experiments")
    parser.add_argument("--config", help="INI config presetting any flag")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=20):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=trials)
        p.add_argument("--out", help="output path (CSV unless noted)")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--demos", help="directory of saved demos")

    p = sub.add_parser("gen-demos", help="generate and save a demo corpus")
    common(p, trials=50)
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("label", help="criticality labels per demo")
    common(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("rollout", help="closed-loop rollouts of one method")
    common(p, trials=1)
    p.add_argument("--method", default="sail", choices=ex.METHODS)
    p.add_argument("--c", type=float, default=1.0)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("metrics", help="aggregate saved rollouts")
    common(p)
    p.add_argument("inputs", nargs="+", help="rollout .jsonl files")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("diagnose", help="single-step OOD score trials")
    common(p, trials=200)
    p.add_argument("--c-values", type=_floats, default=[1.0, 0.33, 0.2])
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep-speed", help="method x speedup sweep")
    common(p)
    p.add_argument("--method", type=_strings, default=["sail", "dp-fast"])
    p.add_argument("--c-values", type=_floats,
                   default=[1.0, 0.5, 0.33, 0.2, 0.1])
    p.set_defaults(func=cmd_sweep_speed)

    p = sub.add_parser("sweep-gain-replay", help="gain x target x speedup replay")
    common(p)
    p.add_argument("--c-values", type=_floats, default=[1.0, 0.5, 0.33, 0.2])
    p.set_defaults(func=cmd_sweep_gain_replay)

    p = sub.add_parser("sweep-noise", help="reference-noise x gain replay")
    common(p, trials=100)
    p.add_argument("--scales", type=_floats, default=[0.0, 0.002, 0.005, 0.01])
    p.set_defaults(func=cmd_sweep_noise)

    p = sub.add_parser("report", help="summary table from a sweep CSV")
    common(p)
    p.add_argument("inputs", nargs="+", help="sweep CSV file")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold config-file values in as extra leading flags after the command."""
    probe = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    if not os.path.exists(known.config):
        parser.error(f"config file not found: {known.config}")
    ini = ConfigParser()
    ini.read(known.config)
    extra: list[str] = []
    for section in ini.sections():
        for key, value in ini.items(section):
            extra += [f"--{key.replace('_', '-')}", value]
    # insert right after the subcommand so explicit flags still override
    for i, token in enumerate(argv):
        if token in ("gen-demos", "label", "rollout", "metrics", "diagnose",
                     "sweep-speed", "sweep-gain-replay", "sweep-noise",
                     "report"):
            return argv[:i + 1] + extra + argv[i + 1:]
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(
        level=os.environ.get("SAILX_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    argv = _apply_config(parser, argv)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as e:
        parser.exit(2, f"sailx: usage error: {e}\n")
    except SailxError as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
