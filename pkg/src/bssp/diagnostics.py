"""The half-space surrogate of G, executable lemma checks, and the bound-gap report."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geometry import ConstraintRegion, project_qplus
from .metrics import _round_trip
from .problem import ProblemInstance, generate_rays
from .solvers import IterateTrace, SolverConfig, _step_batch, lower_bounds

ZERO_GAP_TOL = 1e-6
INNER_SLACK = 1e-9
LYAPUNOV_SLACK = 1e-9
FEJER_SLACK = 1e-6
MINORANT_SLACK = 1e-10


def _anchor(anchor):
    p, rho = anchor
    return np.asarray(p, dtype=float), np.asarray(rho, dtype=float)


def delta_value(x, anchor, problem: ProblemInstance):
    """``[<rho, F(x) - p>]_+^2 / (2 ||rho||^2)``; identically 0 when ``rho = 0``.

    ``anchor`` is the ``(p, rho)`` pair of a :class:`ResidualReport`.
    Broadcasts over leading axes of ``x``.
    """
    p, rho = _anchor(anchor)
    rr = float(rho @ rho)
    Fx = problem.values(x)
    if rr == 0.0:
        out = np.zeros(Fx.shape[:-1])
    else:
        out = np.maximum((Fx - p) @ rho, 0.0) ** 2 / (2.0 * rr)
    return float(out) if np.ndim(out) == 0 else out


def delta_gradient(x, anchor, problem: ProblemInstance) -> np.ndarray:
    """Gradient of :func:`delta_value`: ``[<rho, F(x) - p>]_+ / ||rho||^2 * J(x)^T rho``."""
    p, rho = _anchor(anchor)
    x = np.asarray(x, dtype=float)
    rr = float(rho @ rho)
    if rr == 0.0:
        return np.zeros(x.shape)
    Fx = problem.values(x)
    J = problem.jac(x)
    coef = np.maximum((Fx - p) @ rho, 0.0) / rr
    return coef[..., None] * np.einsum("...mn,m->...n", J, rho)


@dataclass(frozen=True)
class CheckResult:
    name: str
    total: int
    passed: int
    worst_slack: float

    @property
    def ok(self) -> bool:
        return self.passed == self.total


@dataclass(frozen=True)
class LemmaReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {c.name: {"total": c.total, "passed": c.passed, "worst_slack": c.worst_slack,
                         "ok": c.ok} for c in self.checks}


def _check(name, slack) -> CheckResult:
    """``slack >= 0`` means the inequality holds with room ``slack``."""
    slack = np.asarray(slack, dtype=float)
    return CheckResult(name, int(slack.size), int(np.sum(slack >= 0)),
                       float(slack.min()) if slack.size else float("inf"))


def _recompute(trace: IterateTrace, config: SolverConfig):
    # everything but the step length is independent of k, so one batch does it
    T = len(trace)
    st = _step_batch(trace.problem, trace.region, np.tile(trace.r, (T, 1)), trace.z_star,
                     np.full(T, trace.phi_lb), trace.x, config, 0)
    out = {name: getattr(st, name) for name in ("w", "z", "v", "delta", "H", "G", "merit", "eta")}
    out["lam"] = np.asarray(config.step_size(trace.k), dtype=float)
    return out


def check_lemma_suite(trace: IterateTrace, x_star, config: SolverConfig | None = None,
                      samples: int = 100, seed: int = 0) -> LemmaReport:
    """Evaluate the convergence inequalities along ``trace`` against ``x_star``.

    Checks, for every recorded iteration: the three inner-product bounds,
    the one-step distance recursion, the accumulated (quasi-Fejer) bound,
    the merit identity, and that the surrogate built at each iterate stays
    below ``G`` at ``samples`` random points of the decision set. Direction
    vectors are recomputed from the recorded iterates, so a corrupted
    ``x`` column shows up as a violated recursion.
    """
    if trace is None or len(trace) == 0:
        raise ParameterError("empty trace")
    config = trace.config if config is None else config
    problem, region = trace.problem, trace.region
    x_star = np.asarray(x_star, dtype=float)
    q = _recompute(trace, config)
    X, X_next = trace.x, trace.next_points()
    diff = X - x_star
    dist2 = np.sum(diff * diff, axis=1)
    dist2_next = np.sum((X_next - x_star) ** 2, axis=1)

    ind = q["delta"] >= 0
    w_slack = np.einsum("kn,kn->k", q["w"], diff)[ind] - q["delta"][ind] + INNER_SLACK
    z_slack = np.einsum("kn,kn->k", q["z"], diff) - q["H"] + INNER_SLACK
    v_slack = np.einsum("kn,kn->k", q["v"], diff) - q["G"] + INNER_SLACK
    lam, eta = q["lam"], q["eta"]
    lyap = dist2 - (2.0 * lam / eta) * q["merit"] + lam ** 2 - dist2_next + LYAPUNOV_SLACK
    cum = np.concatenate([[0.0], np.cumsum(lam ** 2)[:-1]])
    fejer = dist2[0] + cum - dist2 + FEJER_SLACK
    merit_id = 1e-12 * np.maximum(1.0, np.abs(q["merit"])) - np.abs(
        config.alpha * np.maximum(q["delta"], 0) + config.beta * q["H"] + config.gamma * q["G"]
        - q["merit"])

    rng = np.random.default_rng(seed)
    Y = problem.decision_set.sample(rng, samples)
    FY = problem.values(Y)
    GY = np.asarray(project_qplus(FY, region).g_value)
    rep = project_qplus(trace.F, region)
    P, Rho = np.atleast_2d(rep.p), np.atleast_2d(rep.rho)
    rr = np.sum(Rho * Rho, axis=1)
    ip = np.einsum("km,jm->kj", Rho, FY) - np.sum(Rho * P, axis=1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        dl = np.where(rr[:, None] > 0, np.maximum(ip, 0.0) ** 2 / (2.0 * rr[:, None]), 0.0)
    minorant = GY[None, :] - dl + MINORANT_SLACK

    return LemmaReport((
        _check("inner_w", w_slack), _check("inner_z", z_slack), _check("inner_v", v_slack),
        _check("lyapunov", lyap), _check("quasi_fejer", fejer), _check("merit_identity", merit_id),
        _check("minorant", minorant.ravel()),
    ))


def trace_from_points(points, problem: ProblemInstance, region: ConstraintRegion, r, z_star,
                      phi_lb: float, config: SolverConfig, x_last=None) -> IterateTrace:
    """Build a trace for an arbitrary sequence of iterates (for tests and controls)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    T = len(X)
    r = np.asarray(r, dtype=float)
    st = _step_batch(problem, region, np.tile(r, (T, 1)), np.asarray(z_star, dtype=float),
                     np.full(T, float(phi_lb)), X, config, 0)
    col = lambda name: getattr(st, name)
    return IterateTrace(
        k=np.arange(T), x=X.copy(), F=col("F"), cheb=col("cheb"), delta=col("delta"),
        H=col("H"), G=col("G"), merit=col("merit"), eta=col("eta"),
        lam=np.asarray(config.step_size(np.arange(T)), dtype=float), indicator=col("indicator"), d_norm=col("d_norm"),
        x_last=X[-1].copy() if x_last is None else np.asarray(x_last, dtype=float),
        problem=problem, region=region, r=r, z_star=np.asarray(z_star, dtype=float),
        phi_lb=float(phi_lb), config=config)


@dataclass(frozen=True)
class GapReport:
    """Per-ray bound gap ``sigma = phi* - phi_lb`` with aggregates over available rays."""

    rays: np.ndarray
    phi_lb: np.ndarray
    phi_star: np.ndarray
    sigma: np.ndarray

    def _valid(self) -> np.ndarray:
        return self.sigma[np.isfinite(self.sigma)]

    @property
    def sigma_min(self) -> float:
        return float(self._valid().min())

    @property
    def sigma_max(self) -> float:
        return float(self._valid().max())

    @property
    def sigma_mean(self) -> float:
        return float(self._valid().mean())

    @property
    def zero_ray_count(self) -> int:
        return int(np.sum(self._valid() <= ZERO_GAP_TOL))

    @property
    def zero_gap(self) -> np.ndarray:
        return np.isfinite(self.sigma) & (self.sigma <= ZERO_GAP_TOL)

    def to_dict(self) -> dict:
        rays = [{"ray_index": i, "r": self.rays[i].tolist(), "phi_lb": float(self.phi_lb[i]),
                 "phi_star": float(self.phi_star[i]), "sigma": float(self.sigma[i])}
                for i in range(len(self.rays))]
        return {"rays": rays, "sigma_min": self.sigma_min, "sigma_max": self.sigma_max,
                "sigma_mean": self.sigma_mean, "zero_ray_count": self.zero_ray_count,
                "ray_count": len(self.rays), "zero_gap_tol": ZERO_GAP_TOL}

    def to_json(self) -> str:
        return json.dumps(_round_trip(self.to_dict()), indent=2, sort_keys=True)


def verify_gap(spec, region: ConstraintRegion | None = None, rays=None,
               config: SolverConfig | None = None, ground=None) -> GapReport:
    """Bound gap per ray, with ``phi*`` from the benchmark's ground-truth oracle.

    ``ground`` may pass a precomputed :class:`GroundTruth` for the same rays.
    Rays without a feasible ground-truth point get ``sigma = NaN``.
    """
    from .benchmarks import ground_truth

    region = spec.region if region is None else region
    rays = generate_rays(spec.problem.m, spec.default_rays) if rays is None else np.atleast_2d(rays)
    config = spec.solver_config() if config is None else config
    gt = ground_truth(spec, region, rays) if ground is None else ground
    lb = lower_bounds(spec.problem, rays, spec.z_star, config)
    return GapReport(np.asarray(rays, dtype=float), lb, gt.phi, gt.phi - lb)
