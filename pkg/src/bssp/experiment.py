"""Experiment orchestration and deterministic artifact writing.

Every file written here depends only on the configuration and seed, so two
runs produce byte-identical outputs. Wall-clock timings go to a separate
``timing.json`` for that reason.
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from .benchmarks import GroundTruth, ground_truth
from .config import RunConfig
from .diagnostics import GapReport, verify_gap
from .errors import UnsupportedError
from .metrics import MetricsReport, ParetoApproximation, _fmt, _round_trip, evaluate
from .problem import generate_rays
from .solvers import two_phase_solve

SOLUTIONS = "solutions.csv"
METRICS = "metrics.json"
GROUND_TRUTH = "ground_truth.csv"
TRACE = "trace.jsonl"
TIMING = "timing.json"
GAP = "gap.json"
SWEEP = "sweep.csv"
RECOMPUTED = "metrics_recomputed.json"


def make_rays(m: int, K: int, eps: float) -> np.ndarray:
    """Ray set for a run; a single ray is the simplex centre."""
    if K == 1:
        return np.full((1, m), 1.0 / m)
    return generate_rays(m, K, eps)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_round_trip(obj), indent=2, sort_keys=True) + "\n")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ground_truth(cfg: RunConfig, rays) -> GroundTruth | None:
    if cfg.benchmark is None:
        return None
    return ground_truth(cfg.benchmark, cfg.region, rays)


def write_trace(path: Path, traces, stride: int = 1) -> None:
    with open(path, "w") as fh:
        for b, trace in enumerate(traces):
            if trace is None:
                continue
            for i, rec in enumerate(trace.records()):
                if i % stride == 0 or i == len(trace) - 1:
                    line = _round_trip({"ray_index": b} | rec)
                    fh.write(json.dumps(line, separators=(",", ":")) + "\n")


def solve(cfg: RunConfig) -> tuple[ParetoApproximation, GroundTruth | None, MetricsReport]:
    rays = make_rays(cfg.problem.m, cfg.rays, cfg.eps)
    approx = two_phase_solve(cfg.problem, cfg.region, rays, cfg.solver, threads=cfg.threads,
                             record_trace=cfg.emit_trace)
    gt = _ground_truth(cfg, rays)
    report = evaluate(approx, None if gt is None else gt.y, cfg.region)
    return approx, gt, report


def run_experiment(cfg: RunConfig) -> int:
    """The ``solve`` command: returns 0 unless every ray failed."""
    out = _out_dir(cfg)
    t0 = time.perf_counter()
    approx, gt, report = solve(cfg)
    elapsed = time.perf_counter() - t0
    approx.to_csv(out / SOLUTIONS)
    if gt is not None:
        gt.to_csv(out / GROUND_TRUTH)
    _write_json(out / METRICS, report.to_dict() | {
        "problem": cfg.problem.name, "ray_count": len(approx),
        "phase1_converged": bool(approx.phase1_converged),
        "failures": approx.failures(), "config": cfg.describe()})
    if cfg.emit_trace:
        write_trace(out / TRACE, approx.traces, cfg.trace_stride)
    _write_json(out / TIMING, {"wall_clock_ms": round(1000.0 * elapsed, 3)})
    return 2 if len(approx.failures()) == len(approx) else 0


def ground_truth_command(cfg: RunConfig) -> int:
    if cfg.benchmark is None:
        raise UnsupportedError("ground truth is only available for the built-in benchmarks")
    rays = make_rays(cfg.problem.m, cfg.rays, cfg.eps)
    _ground_truth(cfg, rays).to_csv(_out_dir(cfg) / GROUND_TRUTH)
    return 0


def verify_gap_command(cfg: RunConfig) -> GapReport:
    if cfg.benchmark is None:
        raise UnsupportedError("gap verification needs a ground-truth oracle (built-in benchmark)")
    rays = make_rays(cfg.problem.m, cfg.rays, cfg.eps)
    report = verify_gap(cfg.benchmark, cfg.region, rays, cfg.solver)
    (_out_dir(cfg) / GAP).write_text(report.to_json() + "\n")
    return report


SWEEP_COLUMNS = ("K", "med", "hv_all", "hv_feasible", "pi", "efhv")


def sweep_rays_command(cfg: RunConfig, ray_counts=None) -> list[dict]:
    counts = list(cfg.ray_counts if ray_counts is None else ray_counts)
    rows = []
    for K in counts:
        rays = make_rays(cfg.problem.m, K, cfg.eps)
        approx = two_phase_solve(cfg.problem, cfg.region, rays, cfg.solver, threads=cfg.threads)
        gt = _ground_truth(cfg, rays)
        rep = evaluate(approx, None if gt is None else gt.y, cfg.region)
        rows.append({"K": K, "med": rep.med, "hv_all": rep.hv_all,
                     "hv_feasible": rep.hv_feasible, "pi": rep.pi, "efhv": rep.efhv})
    with open(_out_dir(cfg) / SWEEP, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SWEEP_COLUMNS)
        for row in rows:
            out.writerow([row["K"]] + [_fmt(row[c]) for c in SWEEP_COLUMNS[1:]])
    return rows


def metrics_command(cfg: RunConfig, solutions=None) -> MetricsReport:
    """Recompute metrics from an existing ``solutions.csv``."""
    out = _out_dir(cfg)
    approx = ParetoApproximation.from_csv(out / SOLUTIONS if solutions is None else solutions)
    gt = _ground_truth(cfg, approx.rays)
    report = evaluate(approx, None if gt is None else gt.y, cfg.region)
    _write_json(out / RECOMPUTED, report.to_dict() | {"problem": cfg.problem.name,
                                                      "ray_count": len(approx)})
    return report
