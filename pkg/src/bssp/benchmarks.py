"""The five benchmark problems with hand-coded Jacobians and ground-truth oracles."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, UnsupportedError
from .geometry import BallRegion, ConstraintRegion, qplus_gap
from .problem import Box, ProblemInstance, UnitSphereBox, generate_rays
from .refine import polish_chebyshev
from .scalarization import chebyshev_value

ZDT_N = 30
GRID_1D = 200_000
GRID_2D = 2000
GRID_SPHERE = 1000
FRONT_SAMPLES = 5000


# --- objective maps (all broadcast over leading axes) ---

def _cvx1_f(x):
    t = x[..., 0]
    return np.stack([t, (t - 1.0) ** 2], axis=-1)


def _cvx1_j(x):
    t = x[..., 0]
    return np.stack([np.ones_like(t), 2.0 * (t - 1.0)], axis=-1)[..., None]


def _cvx2_f(x):
    return np.stack([np.sum(x ** 2, axis=-1) / 50.0,
                     np.sum((x - 5.0) ** 2, axis=-1) / 50.0], axis=-1)


def _cvx2_j(x):
    return np.stack([2.0 * x / 50.0, 2.0 * (x - 5.0) / 50.0], axis=-2)


# f_i = (|x|^2 + <a_i, x> + b_i) / s_i
_CVX3_A = np.array([[0.0, 1.0, -12.0], [8.0, -44.8, 8.0], [-44.8, 8.0, 8.0]])
_CVX3_B = np.array([12.0, 44.0, 43.7])
_CVX3_S = np.array([14.0, 57.0, 56.0])


def _cvx3_f(x):
    sq = np.sum(x ** 2, axis=-1, keepdims=True)
    return (sq + x @ _CVX3_A.T + _CVX3_B) / _CVX3_S


def _cvx3_j(x):
    return (2.0 * x[..., None, :] + _CVX3_A) / _CVX3_S[:, None]


def _zdt_g(x):
    n = x.shape[-1]
    return 1.0 + 9.0 / (n - 1) * np.sum(x[..., 1:], axis=-1)


def _zdt1_f(x):
    f1 = x[..., 0]
    g = _zdt_g(x)
    with np.errstate(invalid="ignore"):
        return np.stack([f1, g - np.sqrt(f1 * g)], axis=-1)


def _zdt1_j(x):
    n = x.shape[-1]
    f1 = x[..., 0]
    g = _zdt_g(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = -0.5 * np.sqrt(g / f1)
        dg = 9.0 / (n - 1) * (1.0 - 0.5 * np.sqrt(f1 / g))
    J = np.zeros(x.shape[:-1] + (2, n))
    J[..., 0, 0] = 1.0
    J[..., 1, 0] = d1
    J[..., 1, 1:] = dg[..., None]
    return J


def _zdt2_f(x):
    f1 = x[..., 0]
    g = _zdt_g(x)
    return np.stack([f1, g - f1 ** 2 / g], axis=-1)


def _zdt2_j(x):
    n = x.shape[-1]
    f1 = x[..., 0]
    g = _zdt_g(x)
    J = np.zeros(x.shape[:-1] + (2, n))
    J[..., 0, 0] = 1.0
    J[..., 1, 0] = -2.0 * f1 / g
    J[..., 1, 1:] = (9.0 / (n - 1) * (1.0 + (f1 / g) ** 2))[..., None]
    return J


def zdt1_front(f1):
    return 1.0 - np.sqrt(f1)


def zdt2_front(f1):
    return 1.0 - np.asarray(f1) ** 2


@dataclass(frozen=True)
class BenchmarkSpec:
    """A catalog entry: the problem plus its default target region and settings."""

    name: str
    problem: ProblemInstance
    region: ConstraintRegion
    z_star: np.ndarray
    method: str
    solver_preset: dict
    default_rays: int = 50

    @property
    def default_nu(self) -> float:
        return self.solver_preset["nu"]

    def solver_config(self, **overrides):
        """Tuned :class:`SolverConfig` for this benchmark, with overrides applied."""
        from .solvers import SolverConfig

        return SolverConfig(**(self.solver_preset | overrides))


BENCHMARKS = ("CVX1", "CVX2", "CVX3", "ZDT1", "ZDT2")

# Heavy feasibility weights pull the balance point of positive-gap rays onto
# Q+; the sphere retraction of CVX3 does better with moderate ones. ZDT needs
# short early steps because f2 is undefined for x1 < 0.
_CONVEX_PRESET = {"nu": 1.0, "beta": 1e6, "gamma": 1e6, "step_scale": 1.0}
_SPHERE_PRESET = {"nu": 1.0, "beta": 1e3, "gamma": 1e3, "step_scale": 1.0}
_ZDT_PRESET = {"nu": 0.75, "beta": 1e6, "gamma": 1e6, "step_scale": 0.1}


def build_benchmark(name: str) -> BenchmarkSpec:
    """Return the benchmark called ``name`` (case-insensitive)."""
    key = str(name).upper()
    if key == "CVX1":
        z = np.zeros(2)
        prob = ProblemInstance("CVX1", 1, 2, _cvx1_f, _cvx1_j, Box([0.0], [1.0]), ideal_point=z)
        return BenchmarkSpec("CVX1", prob, BallRegion([0.4, 0.4], 0.2), z, "grid", _CONVEX_PRESET)
    if key == "CVX2":
        z = np.zeros(2)
        prob = ProblemInstance("CVX2", 2, 2, _cvx2_f, _cvx2_j, Box([0.0, 0.0], [5.0, 5.0]),
                               ideal_point=z)
        return BenchmarkSpec("CVX2", prob, BallRegion([0.4, 0.4], 0.2), z, "grid", _CONVEX_PRESET)
    if key == "CVX3":
        # infima on the sphere patch: f1 at (0,0,1), f2 at (0,1,0), f3 at (1,0,0)
        z = np.array([1.0 / 14.0, 0.2 / 57.0, -0.1 / 56.0])
        prob = ProblemInstance("CVX3", 3, 3, _cvx3_f, _cvx3_j,
                               UnitSphereBox(np.zeros(3), np.ones(3)), ideal_point=z,
                               start=np.array([1.0, 0.0, 0.0]))
        return BenchmarkSpec("CVX3", prob, BallRegion([0.5, 0.5, 0.5], 0.2), z, "sphere-grid", _SPHERE_PRESET)
    if key in ("ZDT1", "ZDT2"):
        z = np.zeros(2)
        f, j = (_zdt1_f, _zdt1_j) if key == "ZDT1" else (_zdt2_f, _zdt2_j)
        prob = ProblemInstance(key, ZDT_N, 2, f, j, Box(np.zeros(ZDT_N), np.ones(ZDT_N)),
                               ideal_point=z)
        region = BallRegion([0.4, 0.4], 0.2) if key == "ZDT1" else BallRegion([0.4, 0.5], 0.4)
        return BenchmarkSpec(key, prob, region, z, "front", _ZDT_PRESET)
    raise ParameterError(f"unknown benchmark {name!r}; expected one of {', '.join(BENCHMARKS)}")


@dataclass(frozen=True)
class GroundTruth:
    """Per-ray constrained Chebyshev optima; ``None`` where no feasible point exists."""

    rays: np.ndarray
    x: list
    y: list
    phi: np.ndarray

    @property
    def available(self) -> np.ndarray:
        return np.array([y is not None for y in self.y], dtype=bool)

    def to_csv(self, path) -> None:
        K, m = self.rays.shape
        n = next((len(x) for x in self.x if x is not None), 0)
        header = (["ray_index"] + [f"r{i}" for i in range(m)] + [f"x{i}" for i in range(n)]
                  + [f"y{i}" for i in range(m)])
        with open(Path(path), "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            for k in range(K):
                xs = [""] * n if self.x[k] is None else [format(v, ".17g") for v in self.x[k]]
                ys = [""] * m if self.y[k] is None else [format(v, ".17g") for v in self.y[k]]
                out.writerow([k] + [format(v, ".17g") for v in self.rays[k]] + xs + ys)


def _grid_points(spec: BenchmarkSpec) -> np.ndarray:
    C = spec.problem.decision_set
    if spec.method == "sphere-grid":
        t = np.linspace(0.0, 0.5 * np.pi, GRID_SPHERE)
        th, ph = np.meshgrid(t, t, indexing="ij")
        pts = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
        return pts.reshape(-1, 3)
    if spec.problem.n == 1:
        return np.linspace(C.lower[0], C.upper[0], GRID_1D)[:, None]
    if spec.problem.n == 2:
        a = np.linspace(C.lower[0], C.upper[0], GRID_2D)
        b = np.linspace(C.lower[1], C.upper[1], GRID_2D)
        return np.stack(np.meshgrid(a, b, indexing="ij"), axis=-1).reshape(-1, 2)
    raise UnsupportedError(f"no grid oracle for n={spec.problem.n}")


def _front_points(spec: BenchmarkSpec) -> tuple[np.ndarray, np.ndarray]:
    f1 = np.linspace(0.0, 1.0, FRONT_SAMPLES)
    f2 = zdt1_front(f1) if spec.name == "ZDT1" else zdt2_front(f1)
    X = np.zeros((FRONT_SAMPLES, spec.problem.n))
    X[:, 0] = f1
    return X, np.column_stack([f1, f2])


def ground_truth(spec: BenchmarkSpec, region: ConstraintRegion | None = None,
                 rays=None, polish: bool = True) -> GroundTruth:
    """Constrained Chebyshev optimum per ray, by enumeration.

    Grid methods evaluate a dense decision grid, keep the points whose image
    passes the closed-form ``Q+`` test, take the Chebyshev-minimal one and
    then refine it locally; the refinement is discarded unless it stays
    feasible and improves on the grid value. ZDT problems enumerate the
    analytic front instead and are not refined.
    """

    region = spec.region if region is None else region
    rays = generate_rays(spec.problem.m, spec.default_rays) if rays is None else np.atleast_2d(rays)
    if spec.method == "front":
        X, Y = _front_points(spec)
    else:
        X = _grid_points(spec)
        Y = spec.problem.values(X)
    keep = qplus_gap(Y, region) <= 0.0
    X, Y = X[keep], Y[keep]
    xs, ys, phis = [], [], np.full(len(rays), np.nan)
    for k, r in enumerate(rays):
        if len(Y) == 0:
            xs.append(None)
            ys.append(None)
            continue
        vals = chebyshev_value(Y, r, spec.z_star)
        i = int(np.argmin(vals))
        x, phi = X[i].copy(), float(vals[i])
        if polish and spec.method != "front":
            x, phi = polish_chebyshev(spec.problem, r, spec.z_star, x, region)
        xs.append(x)
        ys.append(spec.problem.values(x))
        phis[k] = phi
    return GroundTruth(np.asarray(rays, dtype=float), xs, ys, phis)
