"""Objective-space target regions and projections onto their downward hulls.

For a target region ``Q`` the solvers work with ``Q+ = Q - R^m_+``, the set
of points that are componentwise no larger than some point of ``Q``. Its
projection is ``p = min(z, y*)`` with ``y*`` minimising ``||(z - y)_+||^2``
over ``Q``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, ParameterError
from .problem import DecisionSet

INNER_STEP = 0.5
INNER_MAX_STEPS = 500
INNER_TOL = 1e-11
INNER_WARN_GRAD = 1e-8


@dataclass(frozen=True)
class BoxRegion:
    """Box target; ``lower=None`` means unbounded below."""

    upper: np.ndarray
    lower: np.ndarray | None = None

    def __post_init__(self):
        upper = np.asarray(self.upper, dtype=float)
        if upper.ndim != 1:
            raise ParameterError("box upper bound must be a vector")
        object.__setattr__(self, "upper", upper)
        if self.lower is not None:
            lower = np.asarray(self.lower, dtype=float)
            if lower.shape != upper.shape:
                raise ParameterError("box bounds must have equal length")
            if np.any(lower > upper):
                raise ParameterError("box requires lower <= upper componentwise")
            object.__setattr__(self, "lower", lower)

    @property
    def dim(self) -> int:
        return self.upper.size

    @property
    def lower_or_inf(self) -> np.ndarray:
        return np.full(self.dim, -np.inf) if self.lower is None else self.lower

    def describe(self) -> dict:
        return {"box": {"lower": None if self.lower is None else self.lower.tolist(),
                        "upper": self.upper.tolist()}}


@dataclass(frozen=True)
class BallRegion:
    """Closed Euclidean ball ``{y : ||y - c|| <= R}``."""

    c: np.ndarray
    R: float

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1:
            raise ParameterError("ball centre must be a vector")
        if not self.R > 0:
            raise ParameterError("ball radius must be positive")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "R", float(self.R))

    @property
    def dim(self) -> int:
        return self.c.size

    def project(self, y) -> np.ndarray:
        diff = y - self.c
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = np.where(norm > self.R, self.R / np.where(norm > 0, norm, 1.0), 1.0)
        return self.c + diff * scale

    def describe(self) -> dict:
        return {"ball": {"c": self.c.tolist(), "R": self.R}}


ConstraintRegion = BoxRegion | BallRegion


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of projecting onto ``Q+``.

    Fields broadcast like the input: for a stack of points every field has
    the matching leading shape.
    """

    p: np.ndarray
    rho: np.ndarray
    g_value: np.ndarray | float
    y_star: np.ndarray
    converged: np.ndarray | bool = True
    warning: str | None = None


def _check_dim(z, region: ConstraintRegion) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != region.dim:
        raise ParameterError(f"objective vector has length {z.shape[-1]}, region has {region.dim}")
    return z


def membership_q(y, region: ConstraintRegion):
    """Closed-form membership in ``Q`` itself (boundary counts as inside)."""
    y = _check_dim(y, region)
    if isinstance(region, BallRegion):
        return np.sum((y - region.c) ** 2, axis=-1) <= region.R ** 2
    return np.all((y >= region.lower_or_inf) & (y <= region.upper), axis=-1)


def _ball_inner(z: np.ndarray, region: BallRegion):
    """Projected gradient on ``g(y) = 0.5 ||(z - y)_+||^2`` over the ball, row by row.

    Rows that already satisfied the stopping rule are frozen, so a row's
    result does not depend on what else is in the batch.
    """
    y = region.project(z)
    active = np.ones(z.shape[:-1], dtype=bool)
    grad_norm = np.zeros(z.shape[:-1])
    for _ in range(INNER_MAX_STEPS):
        if not active.any():
            break
        y_new = region.project(y + INNER_STEP * np.maximum(z - y, 0.0))
        upd = np.linalg.norm(y_new - y, axis=-1)
        y = np.where(active[..., None], y_new, y)
        grad_norm = np.where(active, upd / INNER_STEP, grad_norm)
        active &= upd >= INNER_TOL
    converged = ~active | (grad_norm <= INNER_WARN_GRAD)
    return y, converged


def _ball_closed_form(zb: np.ndarray, region: BallRegion) -> np.ndarray:
    """Exact ``y*`` for a ball: ``c + R u+/||u+||`` with ``u = z - c``.

    Any ``y`` in the ball has ``||(z - y)_+|| >= ||u+|| - R`` and this point
    attains the bound, so it solves the inner problem without iterating.
    Inside ``Q+`` the choice ``c + u+`` attains zero instead.
    """
    up = np.maximum(zb - region.c, 0.0)
    norm = np.linalg.norm(up, axis=-1, keepdims=True)
    scale = np.where(norm > region.R, region.R / np.where(norm > 0, norm, 1.0), 1.0)
    return region.c + up * scale


def project_qplus(z, region: ConstraintRegion, method: str = "closed") -> ResidualReport:
    """Project ``z`` (or a stack of points) onto the downward hull of ``region``.

    Box regions are separable: ``y*`` is the clamp of ``z``. For balls the
    default ``method="closed"`` uses the exact minimiser; ``method="pg"``
    instead runs projected gradient on the inner problem (step 0.5, at most
    500 steps, stop when the update falls below 1e-11), with points already
    in ``Q+`` returned unchanged, and warns when the budget runs out.
    """
    if method not in ("closed", "pg"):
        raise ParameterError(f"unknown projection method {method!r}")
    z = _check_dim(z, region)
    scalar = z.ndim == 1
    zb = np.atleast_2d(z)
    warning = None
    converged = np.ones(zb.shape[:-1], dtype=bool)
    if isinstance(region, BoxRegion):
        y_star = np.clip(zb, region.lower_or_inf, region.upper)
    elif method == "closed":
        y_star = _ball_closed_form(zb, region)
    else:
        inside = np.sum(np.maximum(zb - region.c, 0.0) ** 2, axis=-1) <= region.R ** 2
        y_star = np.empty_like(zb)
        y_star[inside] = zb[inside]
        if not inside.all():
            y_out, conv_out = _ball_inner(zb[~inside], region)
            y_star[~inside] = y_out
            converged[~inside] = conv_out
        if not converged.all():
            warning = (f"Q+ inner solver hit {INNER_MAX_STEPS} steps on "
                       f"{int((~converged).sum())} point(s)")
            warnings.warn(warning, ConvergenceWarning, stacklevel=2)
    p = np.minimum(zb, y_star)
    rho = zb - p
    g = 0.5 * np.sum(rho * rho, axis=-1)
    if scalar:
        return ResidualReport(p[0], rho[0], float(g[0]), y_star[0], bool(converged[0]), warning)
    return ResidualReport(p, rho, g, y_star, converged, warning)


def qplus_distance(z, region: ConstraintRegion):
    """Distance from ``z`` to ``Q+`` via the projection."""
    out = np.sqrt(2.0 * np.asarray(project_qplus(z, region).g_value))
    return float(out) if np.ndim(out) == 0 else out


def membership_qplus(z, region: ConstraintRegion, tol: float = 1e-9):
    """True where ``dist(z, Q+) <= tol``."""
    if tol < 0:
        raise ParameterError("tolerance must be nonnegative")
    return qplus_distance(z, region) <= tol


def qplus_gap(z, region: ConstraintRegion):
    """Closed-form excess ``||(z - c)_+|| - R`` (ball) or ``max(z - upper)`` (box).

    Nonpositive exactly on ``Q+``. This does not go through the projection,
    so ground-truth filters use it as an independent feasibility test.
    """
    z = _check_dim(z, region)
    if isinstance(region, BallRegion):
        return np.linalg.norm(np.maximum(z - region.c, 0.0), axis=-1) - region.R
    return np.max(z - region.upper, axis=-1)


def set_distance(x, decision_set: DecisionSet):
    """``0.5 * ||x - P(x)||^2`` for the decision set."""
    x = np.asarray(x, dtype=float)
    diff = x - decision_set.project(x)
    out = 0.5 * np.sum(diff * diff, axis=-1)
    return float(out) if np.ndim(out) == 0 else out
