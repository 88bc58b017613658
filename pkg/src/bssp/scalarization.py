"""Weighted Chebyshev scalarization ``max_i r_i (f_i - z*_i)`` and its pieces."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError, UnsupportedError
from .problem import Box, ProblemInstance

IDEAL_STARTS = 64
IDEAL_ITERS = 5000


def chebyshev_terms(Fx, r, z_star) -> np.ndarray:
    return np.asarray(r, dtype=float) * (np.asarray(Fx, dtype=float) - np.asarray(z_star, dtype=float))


def chebyshev_value(Fx, r, z_star):
    """Scalarized value; broadcasts over leading axes."""
    out = np.max(chebyshev_terms(Fx, r, z_star), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def active_index(Fx, r, z_star):
    """Index attaining the max; ties go to the lowest index."""
    out = np.argmax(chebyshev_terms(Fx, r, z_star), axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def chebyshev_subgradient(x, problem: ProblemInstance, r, z_star) -> np.ndarray:
    """``r_i * grad f_i(x)`` for the active index ``i``."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    Fx = problem.values(x)
    J = problem.jac(x)
    i = np.asarray(active_index(Fx, r, z_star))
    r_b = np.broadcast_to(r, Fx.shape)
    row = np.take_along_axis(J, i[..., None, None], axis=-2)[..., 0, :]
    weight = np.take_along_axis(r_b, i[..., None], axis=-1)
    return weight * row


def _gradient_lipschitz(problem: ProblemInstance, rng, samples: int = 100) -> np.ndarray:
    """Per-objective gradient Lipschitz estimate from sampled point pairs."""
    box = problem.decision_set
    a = box.sample(rng, samples)
    width = np.maximum(box.upper - box.lower, 1e-12)
    b = box.project(a + 1e-3 * width * rng.standard_normal(a.shape))
    dx = np.linalg.norm(a - b, axis=-1)
    dg = np.linalg.norm(problem.jac(a) - problem.jac(b), axis=-1)
    ok = dx > 0
    return np.max(dg[ok] / dx[ok, None], axis=0) if ok.any() else np.ones(problem.m)


def compute_ideal_point(problem: ProblemInstance, seed: int = 0,
                        starts: int = IDEAL_STARTS, iters: int = IDEAL_ITERS) -> np.ndarray:
    """Componentwise infima of the objectives over the decision set.

    Registered analytic values are returned as-is. Otherwise each objective
    is minimised by multi-start projected gradient over a Box; the result
    is the best value seen, so for non-convex objectives it is only an
    estimate.
    """
    if problem.ideal_point is not None:
        return problem.ideal_point.copy()
    if not isinstance(problem.decision_set, Box):
        raise UnsupportedError("numeric ideal point needs a Box decision set")
    if starts < 1 or iters < 1:
        raise ParameterError("starts and iters must be positive")
    rng = np.random.default_rng(seed)
    box = problem.decision_set
    lip = _gradient_lipschitz(problem, rng)
    z = np.empty(problem.m)
    for i in range(problem.m):
        step = 1.0 / max(float(lip[i]), 1e-12)
        x = box.sample(rng, starts)
        x[0] = box.center
        best = np.min(problem.values(x)[:, i])
        for _ in range(iters):
            grad = problem.jac(x)[:, i, :]
            x = box.project(x - step * grad)
            best = min(best, float(np.min(problem.values(x)[:, i])))
        z[i] = best
    return z
