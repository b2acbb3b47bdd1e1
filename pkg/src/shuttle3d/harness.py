"""Strategy comparison tables, plot-ready dumps, and the latency benchmark."""

from __future__ import annotations

import csv
import gc
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .compensation import CompensationConfig
from .detection_io import DetectionStream, DetectorModel
from .errors import BehindCamera, Shuttle3DError
from .geometry import StereoRig, project
from .metrics import MetricsReport, mean_report, report
from .tracker import RunResult, Strategy, TrackerConfig, run_strategy

log = logging.getLogger(__name__)

TABLE_COLUMNS = ("strategy", "completeness_pct", "s_v", "s_a", "c_avg_cm", "fps_equivalent")


@dataclass
class ComparisonRow:
    strategy: Strategy
    metrics: MetricsReport | None
    fps_equivalent: float | None
    error: str | None = None

    def values(self) -> dict:
        m = self.metrics
        return {
            "strategy": self.strategy.value,
            "completeness_pct": None if m is None else m.completeness,
            "s_v": None if m is None else m.s_v,
            "s_a": None if m is None else m.s_a,
            "c_avg_cm": None if m is None else m.c_avg_cm,
            "fps_equivalent": self.fps_equivalent,
        }


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]
    runs: dict[Strategy, list[RunResult]] = field(default_factory=dict, repr=False)

    def row(self, strategy: Strategy | str) -> ComparisonRow:
        s = Strategy(strategy)
        return next(r for r in self.rows if r.strategy is s)

    def format(self) -> str:
        head = f"{'strategy':<9}{'complete%':>11}{'S_v':>13}{'S_a':>13}{'C_avg(cm)':>11}{'fps':>11}"
        lines = [head]
        for r in self.rows:
            v = r.values()
            cells = [
                _cell(v["completeness_pct"], "{:.2f}"),
                _cell(v["s_v"], "{:.4g}"),
                _cell(v["s_a"], "{:.4g}"),
                _cell(v["c_avg_cm"], "{:.2f}"),
                _cell(v["fps_equivalent"], "{:.1f}") if r.strategy is not Strategy.D else "-",
            ]
            lines.append(f"{r.strategy.value:<9}{cells[0]:>11}{cells[1]:>13}{cells[2]:>13}{cells[3]:>11}{cells[4]:>11}")
        return "\n".join(lines)

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLE_COLUMNS)
            for r in self.rows:
                w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x) for x in r.values().values()])


def _cell(x, fmt: str) -> str:
    return "null" if x is None else fmt.format(x)


def compare_strategies(
    clips: list[tuple[DetectionStream, DetectionStream]],
    rig: StereoRig,
    tracker_config: TrackerConfig = TrackerConfig(),
    compensation_config: CompensationConfig = CompensationConfig(),
    detector: DetectorModel = DetectorModel(),
    strategies: tuple[Strategy | str, ...] = tuple(Strategy),
) -> ComparisonTable:
    """Run each strategy on every clip and average the per-clip metrics.

    A strategy that raises on any clip gets a row of nulls.
    """
    rows = []
    runs: dict[Strategy, list[RunResult]] = {}
    for s in map(Strategy, strategies):
        try:
            results = [
                run_strategy(clip, s, rig, tracker_config, detector, compensation_config) for clip in clips
            ]
        except Shuttle3DError as exc:
            log.error("strategy %s failed: %s", s.value, exc)
            rows.append(ComparisonRow(s, None, None, str(exc)))
            continue
        runs[s] = results
        metrics = mean_report([report(r.trajectory) for r in results])
        step_ns = [ns for r in results for ns in r.stats.step_ns]
        fps = 1e9 / float(np.mean(step_ns)) if step_ns else None
        rows.append(ComparisonRow(s, metrics, fps))
    return ComparisonTable(rows, runs)


def _fmt(x: float) -> str:
    return "" if not math.isfinite(x) else repr(float(x))


def write_plot_dumps(table: ComparisonTable, rig: StereoRig, out_dir: str | os.PathLike) -> list[str]:
    """Per-frame CSVs for the left image, right image and 3D panels.

    Image-plane positions are the projections of each strategy's 3D points.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "left": os.path.join(out_dir, "plot_2d_left.csv"),
        "right": os.path.join(out_dir, "plot_2d_right.csv"),
        "3d": os.path.join(out_dir, "plot_3d.csv"),
    }
    fh = {k: open(p, "w", newline="") for k, p in paths.items()}
    try:
        w = {k: csv.writer(f, lineterminator="\n") for k, f in fh.items()}
        w["left"].writerow(("clip", "strategy", "frame", "u", "v", "mask"))
        w["right"].writerow(("clip", "strategy", "frame", "u", "v", "mask"))
        w["3d"].writerow(("clip", "strategy", "frame", "x_m", "y_m", "z_m", "mask"))
        for s, results in table.runs.items():
            for clip, r in enumerate(results):
                traj = r.trajectory
                for i in range(len(traj)):
                    m = int(traj.mask[i])
                    p = traj.points[i]
                    w["3d"].writerow((clip, s.value, i, *(_fmt(c) for c in p), m))
                    for side, cam in (("left", rig.left), ("right", rig.right)):
                        uv = (math.nan, math.nan)
                        if m:
                            try:
                                uv = project(p, cam)
                            except BehindCamera:
                                pass
                        w[side].writerow((clip, s.value, i, _fmt(uv[0]), _fmt(uv[1]), m))
    finally:
        for f in fh.values():
            f.close()
    return list(paths.values())


def bench(
    clips: list[tuple[DetectionStream, DetectionStream]],
    rig: StereoRig,
    tracker_config: TrackerConfig = TrackerConfig(),
    detector: DetectorModel = DetectorModel(),
    strategy: Strategy | str = Strategy.C,
    repetitions: int = 10,
) -> dict:
    """Per-frame pipeline latency over ``repetitions`` passes across all clips, after one warm-up pass.

    A single ``(left, right)`` pair is accepted in place of a list. As with
    ``timeit``, the garbage collector is paused while timing.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if isinstance(clips, tuple) and len(clips) == 2 and isinstance(clips[0], DetectionStream):
        clips = [clips]
    if not clips:
        raise ValueError("bench needs at least one clip")

    def one_pass():
        return [run_strategy(c, strategy, rig, tracker_config, detector) for c in clips]

    one_pass()
    all_ns: list[int] = []
    rep_means = []
    rep_medians = []
    first = None
    deterministic = True
    gc_was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        reps = [one_pass() for _ in range(repetitions)]
    finally:
        if gc_was_enabled:
            gc.enable()
    for runs in reps:
        rep_ns = [ns for r in runs for ns in r.stats.step_ns]
        all_ns.extend(rep_ns)
        rep_means.append(float(np.mean(rep_ns)))
        rep_medians.append(float(np.median(rep_ns)))
        if first is None:
            first = runs
        elif not all(a.trajectory == b.trajectory and a.outcomes == b.outcomes for a, b in zip(runs, first)):
            deterministic = False
    arr = np.array(all_ns, dtype=np.float64)
    mean_ns = float(arr.mean())
    median_ns = float(np.median(arr))
    return {
        "strategy": Strategy(strategy).value,
        "clips": len(clips),
        "frames": sum(len(c[0]) for c in clips),
        "repetitions": repetitions,
        "mean_step_us": mean_ns / 1e3,
        "median_step_us": median_ns / 1e3,
        "p99_step_us": float(np.percentile(arr, 99)) / 1e3,
        "fps_equivalent": 1e9 / mean_ns,
        "fps_equivalent_median": 1e9 / median_ns,
        "rep_mean_step_us": [m / 1e3 for m in rep_means],
        "rep_median_step_us": [m / 1e3 for m in rep_medians],
        # spread of the per-repetition medians; means are dominated by GC and scheduler spikes
        "rep_cov": float(np.std(rep_medians) / np.mean(rep_medians)),
        "rep_cov_mean": float(np.std(rep_means) / np.mean(rep_means)),
        "deterministic": deterministic,
    }
