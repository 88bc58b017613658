"""Local polishing of Chebyshev minimisers via the smooth epigraph form.

``min_x max_i r_i (f_i(x) - z_i)`` is rewritten as ``min t`` subject to
``t >= r_i (f_i(x) - z_i)``, optionally with ``F(x) in Q+`` and the
sphere equality, and handed to SLSQP from a good starting point. The
polished point is kept only if it is feasible and does not worsen the
objective, so callers can always fall back to their coarse answer.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import minimize

from .geometry import BallRegion, BoxRegion, ConstraintRegion, qplus_gap
from .problem import Box, ProblemInstance, UnitSphereBox
from .scalarization import chebyshev_value

FEAS_TOL = 1e-12


def _constraints(problem: ProblemInstance, r, z_star, region: ConstraintRegion | None):
    n = problem.n
    cons = [{
        "type": "ineq",
        "fun": lambda u: u[n] - r * (problem.evaluate(u[:n]) - z_star),
        "jac": lambda u: np.hstack([-r[:, None] * problem.jacobian(u[:n]),
                                    np.ones((problem.m, 1))]),
    }]
    if isinstance(region, BallRegion):
        def ball_fun(u):
            ex = np.maximum(problem.evaluate(u[:n]) - region.c, 0.0)
            return np.array([region.R ** 2 - ex @ ex])

        def ball_jac(u):
            ex = np.maximum(problem.evaluate(u[:n]) - region.c, 0.0)
            g = -2.0 * ex @ problem.jacobian(u[:n])
            return np.append(g, 0.0)[None, :]

        cons.append({"type": "ineq", "fun": ball_fun, "jac": ball_jac})
    elif isinstance(region, BoxRegion):
        cons.append({
            "type": "ineq",
            "fun": lambda u: region.upper - problem.evaluate(u[:n]),
            "jac": lambda u: np.hstack([-problem.jacobian(u[:n]), np.zeros((problem.m, 1))]),
        })
    if isinstance(problem.decision_set, UnitSphereBox):
        cons.append({
            "type": "eq",
            "fun": lambda u: np.array([u[:n] @ u[:n] - 1.0]),
            "jac": lambda u: np.append(2.0 * u[:n], 0.0)[None, :],
        })
    return cons


def polish_chebyshev(problem: ProblemInstance, r, z_star, x0,
                     region: ConstraintRegion | None = None,
                     maxiter: int = 300) -> tuple[np.ndarray, float]:
    """Refine ``x0`` towards a (constrained) Chebyshev minimiser.

    Returns ``(x, phi)``; ``x0`` itself when SLSQP fails to improve on it.
    """
    r = np.asarray(r, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    C = problem.decision_set
    phi0 = float(chebyshev_value(problem.evaluate(x0), r, z_star))
    bounds = [(lo, hi) for lo, hi in zip(C.lower, C.upper)] + [(None, None)]
    u0 = np.append(x0, phi0)
    try:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(lambda u: u[-1], u0, jac=lambda u: np.eye(len(u))[-1],
                           method="SLSQP", bounds=bounds,
                           constraints=_constraints(problem, r, z_star, region),
                           options={"ftol": 1e-15, "maxiter": maxiter})
        x = np.asarray(res.x[:-1], dtype=float)
    except (ValueError, ArithmeticError):
        return x0, phi0
    x = C.project(x) if isinstance(C, Box) else x / max(np.linalg.norm(x), 1e-300)
    if not np.all(np.isfinite(x)):
        return x0, phi0
    with np.errstate(all="ignore"):
        fx = problem.evaluate(x)
    if not np.all(np.isfinite(fx)):
        return x0, phi0
    if isinstance(C, UnitSphereBox) and not C.contains(x, tol=1e-12):
        return x0, phi0
    if region is not None and qplus_gap(fx, region) > FEAS_TOL:
        return x0, phi0
    phi = float(chebyshev_value(fx, r, z_star))
    if phi <= phi0:
        return x, phi
    return x0, phi0
