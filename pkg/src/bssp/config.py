"""JSON run configuration: parsing, validation and defaults."""

from __future__ import annotations

import importlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .benchmarks import BENCHMARKS, BenchmarkSpec, build_benchmark
from .errors import ConfigError, ParameterError
from .geometry import BallRegion, BoxRegion, ConstraintRegion
from .problem import ProblemInstance
from .solvers import SolverConfig

TOP_KEYS = {"benchmark", "problem", "Q", "rays", "eps", "solver", "out", "emit_trace",
            "trace_stride", "seed", "threads", "ray_counts"}
SOLVER_KEYS = {f.name for f in fields(SolverConfig)} - {"seed"}


@dataclass
class RunConfig:
    """A validated experiment description."""

    problem: ProblemInstance
    region: ConstraintRegion
    solver: SolverConfig
    benchmark: BenchmarkSpec | None = None
    rays: int = 50
    eps: float = 1e-3
    out: str = "out"
    emit_trace: bool = False
    trace_stride: int = 1
    seed: int = 0
    threads: int = 1
    ray_counts: list = field(default_factory=lambda: [10, 20, 50, 100])

    def describe(self) -> dict:
        return {"problem": self.problem.name, "Q": self.region.describe(), "rays": self.rays,
                "eps": self.eps, "seed": self.seed, "solver": asdict(self.solver)}

    def with_overrides(self, seed=None, threads=None, out=None, emit_trace=None) -> "RunConfig":
        cfg = RunConfig(**{f.name: getattr(self, f.name) for f in fields(self)})
        if seed is not None:
            cfg.seed = _int(seed, "seed", 0)
            cfg.solver = SolverConfig(**(asdict(cfg.solver) | {"seed": cfg.seed}))
        if threads is not None:
            cfg.threads = _int(threads, "threads", 1)
        if out is not None:
            cfg.out = str(out)
        if emit_trace:
            cfg.emit_trace = True
        return cfg


def _number(value, path, lo=None, hi=None, lo_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(path, f"{value} is out of range")
    if hi is not None and value > hi:
        raise ConfigError(path, f"{value} is out of range")
    return value


def _int(value, path, lo):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if value < lo:
        raise ConfigError(path, f"must be at least {lo}, got {value}")
    return value


def _vector(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a nonempty list of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _unknown(obj: dict, allowed, path):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def parse_region(obj, path="Q") -> ConstraintRegion:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ConfigError(path, 'expected {"ball": {...}} or {"box": {...}}')
    (kind, body), = obj.items()
    if not isinstance(body, dict):
        raise ConfigError(f"{path}.{kind}", "expected an object")
    try:
        if kind == "ball":
            _unknown(body, {"c", "R"}, f"{path}.ball")
            if "c" not in body or "R" not in body:
                raise ConfigError(f"{path}.ball", "needs both c and R")
            return BallRegion(_vector(body["c"], f"{path}.ball.c"),
                              _number(body["R"], f"{path}.ball.R", 0.0, lo_open=True))
        if kind == "box":
            _unknown(body, {"upper", "lower"}, f"{path}.box")
            if "upper" not in body:
                raise ConfigError(f"{path}.box", "needs upper")
            lower = body.get("lower")
            return BoxRegion(_vector(body["upper"], f"{path}.box.upper"),
                             None if lower is None else _vector(lower, f"{path}.box.lower"))
    except ParameterError as exc:
        raise ConfigError(f"{path}.{kind}", str(exc)) from exc
    raise ConfigError(path, f"unknown region type {kind!r}")


def _load_problem(ref, path) -> ProblemInstance:
    if not isinstance(ref, str) or ":" not in ref:
        raise ConfigError(path, 'expected "module:factory"')
    mod, _, attr = ref.partition(":")
    try:
        factory = getattr(importlib.import_module(mod), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(path, f"cannot resolve {ref!r}: {exc}") from exc
    problem = factory() if callable(factory) else factory
    if not isinstance(problem, ProblemInstance):
        raise ConfigError(path, f"{ref!r} did not produce a ProblemInstance")
    return problem


def parse_config(source) -> RunConfig:
    """Parse a JSON document given as a path, inline text or an already-loaded dict.

    Unknown keys are rejected and every error names the offending key path.
    Solver fields default to the benchmark's tuned settings.
    """
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            try:
                text = Path(text).read_text()
            except OSError as exc:
                raise ConfigError("<file>", f"cannot read {source}: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"malformed JSON: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be an object")
    _unknown(data, TOP_KEYS, "")

    spec = None
    if "benchmark" in data and "problem" in data:
        raise ConfigError("problem", "give either benchmark or problem, not both")
    if "benchmark" in data:
        if not isinstance(data["benchmark"], str) or data["benchmark"].upper() not in BENCHMARKS:
            raise ConfigError("benchmark", f"unknown benchmark {data['benchmark']!r}; "
                                           f"expected one of {', '.join(BENCHMARKS)}")
        spec = build_benchmark(data["benchmark"])
        problem = spec.problem
    elif "problem" in data:
        problem = _load_problem(data["problem"], "problem")
    else:
        raise ConfigError("benchmark", "missing; name a benchmark or a problem factory")

    if "Q" in data:
        region = parse_region(data["Q"])
    elif spec is not None:
        region = spec.region
    else:
        raise ConfigError("Q", "required for user problems")
    if region.dim != problem.m:
        raise ConfigError("Q", f"region has dimension {region.dim}, problem has m={problem.m}")

    seed = _int(data.get("seed", 0), "seed", 0)
    solver_in = data.get("solver", {})
    if not isinstance(solver_in, dict):
        raise ConfigError("solver", "expected an object")
    _unknown(solver_in, SOLVER_KEYS, "solver")
    preset = dict(spec.solver_preset) if spec is not None else {}
    for key, value in solver_in.items():
        p = f"solver.{key}"
        preset[key] = _int(value, p, 1) if key == "max_iters" else _number(value, p)
    try:
        solver = SolverConfig(**(preset | {"seed": seed}))
    except ParameterError as exc:
        bad = next((k for k in solver_in if k in str(exc)), "")
        raise ConfigError(f"solver.{bad}" if bad else "solver", str(exc)) from exc

    m = problem.m
    eps = _number(data.get("eps", 1e-3), "eps", 0.0)
    if eps >= 1.0 / m:
        raise ConfigError("eps", f"must be below 1/m = {1.0 / m:.4g}")
    ray_counts = data.get("ray_counts", [10, 20, 50, 100])
    if not isinstance(ray_counts, list) or not ray_counts:
        raise ConfigError("ray_counts", "expected a nonempty list of integers")
    ray_counts = [_int(v, f"ray_counts[{i}]", 2) for i, v in enumerate(ray_counts)]
    if ray_counts != sorted(set(ray_counts)):
        raise ConfigError("ray_counts", "must be strictly ascending")
    emit = data.get("emit_trace", False)
    if not isinstance(emit, bool):
        raise ConfigError("emit_trace", "expected true or false")
    out = data.get("out", "out")
    if not isinstance(out, str):
        raise ConfigError("out", "expected a path string")
    return RunConfig(problem=problem, region=region, solver=solver, benchmark=spec,
                     rays=_int(data.get("rays", 50), "rays", 1), eps=eps, out=out,
                     emit_trace=emit, trace_stride=_int(data.get("trace_stride", 1), "trace_stride", 1),
                     seed=seed, threads=_int(data.get("threads", 1), "threads", 1),
                     ray_counts=ray_counts)
