"""Command-line entry point: ``shuttle3d simulate|track|compensate|metrics|compare|bench``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
Errors go to stderr as ``shuttle3d: error[<Kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .compensation import compensate
from .config import RunConfig, load_json, load_rig
from .detection_io import (
    read_detections,
    read_trajectory,
    write_detections,
    write_trajectory,
)
from .errors import ConfigError, DataError, InvalidScript
from .flight_sim import (
    REFERENCE_NOISE,
    flight_params_from_dict,
    noise_from_dict,
    reference_rallies,
    render_detections,
    script_from_dict,
    simulate_flight,
)
from .harness import bench, compare_strategies, write_plot_dumps
from .metrics import report
from .tracker import Strategy, run_strategy
from .trajectory import DETECTED

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

log = logging.getLogger("shuttle3d")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"shuttle3d: error[Usage]: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    for key in ("rig", "left", "right", "out", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "strategy", None) is not None:
        cfg.strategy = Strategy(args.strategy)
    return cfg


def _require(cfg: RunConfig, *keys: str) -> None:
    for key in keys:
        val = getattr(cfg, key)
        if val is None:
            raise ConfigError(f"--{key} is required")
        if key in ("left", "right") and not os.path.exists(val):
            raise ConfigError(f"{key} detections file not found: {val}")


def _write_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args) -> int:
    rig = load_rig(args.rig)
    os.makedirs(args.out, exist_ok=True)
    if args.reference:
        seed = REFERENCE_NOISE.rng_seed if args.seed is None else args.seed
        for k, script in enumerate(reference_rallies()):
            noise = dataclasses.replace(REFERENCE_NOISE, rng_seed=seed + k)
            _simulate_one(script, None, rig, noise, os.path.join(args.out, f"rally_{k:02d}"))
        print(f"wrote {len(reference_rallies())} reference rallies to {args.out}")
        return EXIT_OK
    if args.script is None:
        raise ConfigError("--script is required unless --reference is given")
    doc = load_json(args.script)
    if not isinstance(doc, dict):
        raise InvalidScript(f"{args.script}: rally script must be a JSON object")
    flight = doc.get("flight")
    if args.flight is not None:
        flight = load_json(args.flight)
    script = script_from_dict(doc)
    noise = noise_from_dict(load_json(args.noise)) if args.noise else noise_from_dict(None)
    if args.seed is not None:
        noise = dataclasses.replace(noise, rng_seed=args.seed)
    _simulate_one(script, flight, rig, noise, args.out)
    return EXIT_OK


def _simulate_one(script, flight, rig, noise, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    traj = simulate_flight(script, flight_params_from_dict(flight))
    left, right = render_detections(traj, rig, noise)
    write_trajectory(traj, os.path.join(out, "ground_truth.csv"))
    write_detections(left, os.path.join(out, "left.csv"))
    write_detections(right, os.path.join(out, "right.csv"))


def _load_streams(cfg: RunConfig):
    _require(cfg, "left", "right")
    return read_detections(cfg.left), read_detections(cfg.right)


def cmd_track(args) -> int:
    cfg = _run_config(args)
    _require(cfg, "out")
    rig = load_rig(cfg.rig)
    streams = _load_streams(cfg)
    result = run_strategy(streams, cfg.strategy, rig, cfg.tracker, cfg.detector, cfg.compensation)
    os.makedirs(cfg.out, exist_ok=True)
    write_trajectory(result.trajectory, os.path.join(cfg.out, "trajectory.csv"), result.provenance)
    stats = result.stats.to_dict()
    stats["strategy"] = cfg.strategy.value
    _write_json(stats, os.path.join(cfg.out, "stats.json"))
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def cmd_compensate(args) -> int:
    cfg = _run_config(args)
    _require(cfg, "out")
    rig = load_rig(cfg.rig)
    traj, _ = read_trajectory(args.trajectory)
    left, right = _load_streams(cfg)
    if len(left) != len(traj) or len(right) != len(traj):
        raise DataError("trajectory and detection streams have different frame counts")
    lpx, _ = left.pixels()
    rpx, _ = right.pixels()
    keep = (traj.mask == DETECTED)[:, None]
    comp = compensate(traj, np.where(keep, lpx, np.nan), np.where(keep, rpx, np.nan), rig, cfg.compensation)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "compensated.csv")
    write_trajectory(comp.trajectory, path, comp.provenance)
    print(f"wrote {path} (completeness {comp.completeness:.2f}%)")
    return EXIT_OK


def cmd_metrics(args) -> int:
    traj, _ = read_trajectory(args.trajectory)
    rep = report(traj, args.frames).to_dict()
    text = json.dumps(rep, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if args.csv:
        new = not os.path.exists(args.csv)
        with open(args.csv, "a") as fh:
            if new:
                fh.write("trajectory," + ",".join(rep) + "\n")
            fh.write(args.trajectory + "," + ",".join("" if v is None else repr(v) for v in rep.values()) + "\n")
    return EXIT_OK


def _clip_pairs(args, cfg: RunConfig):
    lefts = args.left or ([cfg.left] if cfg.left else [])
    rights = args.right or ([cfg.right] if cfg.right else [])
    if not lefts or len(lefts) != len(rights):
        raise ConfigError("give matching --left/--right pairs (repeat the flags for several clips)")
    clips = []
    for lp, rp in zip(lefts, rights):
        for p in (lp, rp):
            if not os.path.exists(p):
                raise ConfigError(f"detections file not found: {p}")
        clips.append((read_detections(lp), read_detections(rp)))
    return clips


def cmd_compare(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.rig:
        cfg.rig = args.rig
    out = args.out or cfg.out
    if out is None:
        raise ConfigError("--out is required")
    rig = load_rig(cfg.rig)
    clips = _clip_pairs(args, cfg)
    table = compare_strategies(clips, rig, cfg.tracker, cfg.compensation, cfg.detector)
    os.makedirs(out, exist_ok=True)
    table.write_csv(os.path.join(out, "comparison.csv"))
    write_plot_dumps(table, rig, out)
    print(table.format())
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = RunConfig.load(args.config)
    for key in ("rig", "out"):
        if getattr(args, key) is not None:
            setattr(cfg, key, getattr(args, key))
    if args.strategy is not None:
        cfg.strategy = Strategy(args.strategy)
    rig = load_rig(cfg.rig)
    clips = _clip_pairs(args, cfg)
    res = bench(clips, rig, cfg.tracker, cfg.detector, cfg.strategy, args.reps)
    text = json.dumps(res, indent=2, sort_keys=True)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shuttle3d", description="Stereo shuttlecock trajectory tracking harness.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a rally and render noisy detections")
    s.add_argument("--script", help="rally script JSON")
    s.add_argument("--flight", help="flight parameter JSON (overrides the script's 'flight' key)")
    s.add_argument("--noise", help="noise model JSON")
    s.add_argument("--rig")
    s.add_argument("--seed", type=int)
    s.add_argument("--reference", action="store_true", help="write the 12-rally reference fixture")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    def tracking_args(sp, strategy=True):
        sp.add_argument("--config", help="run config JSON")
        sp.add_argument("--rig")
        sp.add_argument("--left")
        sp.add_argument("--right")
        sp.add_argument("--out")
        if strategy:
            sp.add_argument("--strategy", choices=[x.value for x in Strategy])

    t = sub.add_parser("track", help="track one stream pair with a strategy")
    tracking_args(t)
    t.set_defaults(func=cmd_track)

    c = sub.add_parser("compensate", help="fill gaps of a trajectory file")
    tracking_args(c, strategy=False)
    c.add_argument("--trajectory", required=True)
    c.set_defaults(func=cmd_compensate)

    m = sub.add_parser("metrics", help="smoothness and completeness of a trajectory file")
    m.add_argument("--trajectory", required=True)
    m.add_argument("--frames", type=int, help="total frame count (default: the track's extent)")
    m.add_argument("--out", help="write the JSON report here instead of stdout")
    m.add_argument("--csv", help="append a row to this CSV table")
    m.set_defaults(func=cmd_metrics)

    k = sub.add_parser("compare", help="run strategies A-D and tabulate")
    k.add_argument("--config")
    k.add_argument("--rig")
    k.add_argument("--left", action="append")
    k.add_argument("--right", action="append")
    k.add_argument("--out")
    k.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="per-frame pipeline latency")
    b.add_argument("--config")
    b.add_argument("--rig")
    b.add_argument("--left", action="append")
    b.add_argument("--right", action="append")
    b.add_argument("--out", help="write the JSON report here as well")
    b.add_argument("--strategy", choices=[x.value for x in Strategy])
    b.add_argument("--reps", type=int, default=10)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"shuttle3d: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"shuttle3d: error[FileNotFound]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"shuttle3d: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"shuttle3d: error[ValueError]: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
