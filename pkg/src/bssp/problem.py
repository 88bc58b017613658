"""Multi-objective problem instances, decision sets and preference rays.

Every map here broadcasts over leading axes: a decision "vector" may be an
array of shape ``(..., n)`` and the result keeps the leading shape. The
solvers rely on this to advance many rays in one numpy call.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateInputWarning, NumericError, ParameterError

SPHERE_ROUNDS = 50


@dataclass(frozen=True)
class Box:
    """Closed box ``{x : lower <= x <= upper}``; the convex decision set."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).copy()
        upper = np.asarray(self.upper, dtype=float).copy()
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ParameterError("box bounds must be 1-D vectors of equal length")
        if np.any(lower > upper):
            raise ParameterError("box requires lower <= upper componentwise")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))


@dataclass(frozen=True)
class UnitSphereBox:
    """Unit sphere intersected with a box (non-convex).

    Projection is a retraction, not a metric projection: a fixed number of
    alternating rounds of sphere normalisation and box clamping.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        box = Box(self.lower, self.upper)
        object.__setattr__(self, "lower", box.lower)
        object.__setattr__(self, "upper", box.upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 1e-9):
        x = np.asarray(x, dtype=float)
        on_sphere = np.abs(np.linalg.norm(x, axis=-1) - 1.0) <= tol
        in_box = np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        return on_sphere & in_box

    def project_flagged(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Project and report which inputs were degenerate.

        A row whose norm vanishes at any round (e.g. the zero vector, or a
        point the box clamp sends to zero) maps to ``(1, 0, ..., 0)``.
        """
        y = np.array(x, dtype=float)
        batch = y.shape[:-1]
        degenerate = np.zeros(batch, dtype=bool)
        s = y
        for _ in range(SPHERE_ROUNDS):
            norm = np.linalg.norm(y, axis=-1, keepdims=True)
            bad = norm[..., 0] <= 0.0
            degenerate |= bad
            s = y / np.where(norm > 0.0, norm, 1.0)
            y = np.clip(s, self.lower, self.upper)
        if np.any(degenerate):
            canon = np.zeros(self.dim)
            canon[0] = 1.0
            s = np.where(degenerate[..., None], canon, s)
            warnings.warn("zero vector under sphere projection; returned (1, 0, ..., 0)",
                          DegenerateInputWarning, stacklevel=2)
        return s, degenerate

    def project(self, x) -> np.ndarray:
        return self.project_flagged(x)[0]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raw = np.abs(rng.standard_normal((size, self.dim)))
        return self.project(raw)


DecisionSet = Box | UnitSphereBox


def project_decision_set(x, decision_set: DecisionSet) -> np.ndarray:
    """Map ``x`` onto the decision set (metric projection for a Box)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != decision_set.dim:
        raise ParameterError(f"expected decision vectors of length {decision_set.dim}")
    return decision_set.project(x)


@dataclass(frozen=True)
class ProblemInstance:
    """A multi-objective problem ``min_{x in C} F(x)``.

    ``evaluate`` maps ``(..., n) -> (..., m)`` and ``jacobian`` maps
    ``(..., n) -> (..., m, n)``. Use :meth:`from_pointwise` to wrap
    functions that only accept a single vector.
    """

    name: str
    n: int
    m: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    decision_set: DecisionSet
    ideal_point: np.ndarray | None = None
    start: np.ndarray | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 2:
            raise ParameterError("need n >= 1 and m >= 2")
        if self.decision_set.dim != self.n:
            raise ParameterError("decision set dimension does not match n")
        if self.ideal_point is not None:
            z = np.asarray(self.ideal_point, dtype=float)
            if z.shape != (self.m,) or not np.all(np.isfinite(z)):
                raise ParameterError("ideal point must be a finite length-m vector")
            object.__setattr__(self, "ideal_point", z)

    @classmethod
    def from_pointwise(cls, name, n, m, evaluate, jacobian, decision_set, **kwargs):
        def batched(fn, tail):
            def wrapper(x):
                x = np.asarray(x, dtype=float)
                flat = x.reshape(-1, n)
                out = np.stack([np.asarray(fn(row), dtype=float) for row in flat])
                return out.reshape(x.shape[:-1] + tail)
            return wrapper

        return cls(name, n, m, batched(evaluate, (m,)), batched(jacobian, (m, n)),
                   decision_set, **kwargs)

    def initial_point(self) -> np.ndarray:
        """Phase-1 starting point: registered start, else the box centre."""
        if self.start is not None:
            return np.asarray(self.start, dtype=float).copy()
        if isinstance(self.decision_set, Box):
            return self.decision_set.center.copy()
        return self.decision_set.project(np.ones(self.n))

    def values(self, x) -> np.ndarray:
        fx = np.asarray(self.evaluate(np.asarray(x, dtype=float)), dtype=float)
        if not np.all(np.isfinite(fx)):
            raise NumericError(f"{self.name}: non-finite objective value")
        return fx

    def jac(self, x) -> np.ndarray:
        jx = np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=float)
        if not np.all(np.isfinite(jx)):
            raise NumericError(f"{self.name}: non-finite Jacobian entry")
        return jx


def check_preference(r, m: int | None = None) -> np.ndarray:
    """Validate a preference vector (or a stack of them) and return it as floats."""
    r = np.asarray(r, dtype=float)
    if m is not None and r.shape[-1] != m:
        raise ParameterError(f"preference vector must have {m} components")
    if np.any(r <= 0):
        raise ParameterError("preference components must be strictly positive")
    if np.any(np.abs(r.sum(axis=-1) - 1.0) > 1e-12):
        raise ParameterError("preference components must sum to 1")
    return r


def _lattice(m: int, order: int) -> list[tuple[int, ...]]:
    pts = []
    for head in itertools.product(range(order + 1), repeat=m - 1):
        if sum(head) <= order:
            pts.append(head + (order - sum(head),))
    return sorted(pts)


def generate_rays(m: int, K: int, eps: float = 1e-3) -> np.ndarray:
    """Uniformly spaced preference vectors on the simplex, sorted lexicographically.

    For ``m == 2`` the first weights are ``linspace(eps, 1 - eps, K)``. For
    ``m >= 3`` the smallest simplex lattice holding at least ``K`` points is
    built, clipped to ``>= eps``, renormalised, and its first ``K`` points
    (lexicographic order) kept. ``eps == 0`` is allowed and skips clipping;
    such rays are not strictly positive.
    """
    if m < 2:
        raise ParameterError("m must be at least 2")
    if K < 2:
        raise ParameterError("need at least 2 rays")
    if not 0.0 <= eps < 1.0 / m:
        raise ParameterError(f"eps must lie in [0, 1/m), got {eps}")
    if m == 2:
        first = np.linspace(eps, 1.0 - eps, K)
        return np.column_stack([first, 1.0 - first])

    order = 1
    while math.comb(order + m - 1, m - 1) < K:
        order += 1
    pts = np.array(_lattice(m, order)[:K], dtype=float) / order
    pts = np.maximum(pts, eps)
    pts /= pts.sum(axis=1, keepdims=True)
    return pts[np.lexsort(pts.T[::-1])]
