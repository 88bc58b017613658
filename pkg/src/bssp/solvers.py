"""Phase-1 CQ feasibility, the Chebyshev lower bound, and the ABP iteration.

The ABP engine advances a whole batch of rays at once: every row of the
state arrays is one independent ray, and each row stops, fails or records
its best iterate on its own. The single-ray entry points are thin wrappers
around a batch of one, so batched and one-at-a-time runs agree exactly.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, NumericError, ParameterError
from .geometry import ConstraintRegion, membership_q, project_qplus, qplus_distance
from .metrics import ParetoApproximation
from .problem import Box, ProblemInstance, UnitSphereBox, check_preference
from .refine import polish_chebyshev
from .scalarization import chebyshev_value, compute_ideal_point

STOP_STREAK = 10
LB_STARTS = 64
LB_ITERS = 5000
LB_STEP = 0.1
LB_EXPONENT = 0.75
LB_GRID = 1000
CQ_SAMPLES = 100
CQ_MAX_ITERS = 20000
CQ_TOL = 1e-14
FEAS_TOL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    """Penalty weights, step schedule and budgets for the ABP iteration."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    mu: float = 1e-3
    nu: float = 1.0
    max_iters: int = 20000
    phi_tol: float = 1e-10
    seed: int = 0
    step_scale: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "mu", "step_scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a positive finite number, got {value}")
        if not 0.5 < self.nu <= 1.0:
            raise ParameterError(f"nu must lie in (0.5, 1], got {self.nu}")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if not self.phi_tol >= 0:
            raise ParameterError("phi_tol must be nonnegative")

    def step_size(self, k):
        """``lambda_k = step_scale / (k+1)^nu``."""
        return self.step_scale / (np.asarray(k, dtype=float) + 1.0) ** self.nu


@dataclass
class IterateTrace:
    """Per-iteration record of one ABP run, stored column-wise.

    Row ``k`` describes iterate ``x^k`` before the step. ``x_last`` is the
    point produced by the final step, so ``x^{k+1}`` is available for every
    recorded ``k``. ``merit`` holds the merit function and ``cheb`` the
    Chebyshev value.
    """

    k: np.ndarray
    x: np.ndarray
    F: np.ndarray
    cheb: np.ndarray
    delta: np.ndarray
    H: np.ndarray
    G: np.ndarray
    merit: np.ndarray
    eta: np.ndarray
    lam: np.ndarray
    indicator: np.ndarray
    d_norm: np.ndarray
    x_last: np.ndarray
    problem: ProblemInstance | None = field(default=None, repr=False)
    region: ConstraintRegion | None = field(default=None, repr=False)
    r: np.ndarray | None = None
    z_star: np.ndarray | None = None
    phi_lb: float | None = None
    config: SolverConfig | None = None

    COLUMNS = ("k", "x", "F", "cheb", "delta", "H", "G", "merit", "eta", "lam",
               "indicator", "d_norm")

    def __len__(self) -> int:
        return len(self.k)

    def next_points(self) -> np.ndarray:
        """``x^{k+1}`` for every recorded ``k``."""
        return np.vstack([self.x[1:], self.x_last[None, :]])

    def records(self):
        """Yield one JSON-ready dict per iteration."""
        for i in range(len(self)):
            rec = {}
            for name in self.COLUMNS:
                value = getattr(self, name)[i]
                rec[name] = value.tolist() if isinstance(value, np.ndarray) else value.item()
            yield rec


@dataclass
class _Batch:
    x_next: np.ndarray
    ok: np.ndarray
    F: np.ndarray
    cheb: np.ndarray
    delta: np.ndarray
    H: np.ndarray
    G: np.ndarray
    merit: np.ndarray
    eta: np.ndarray
    lam: float
    indicator: np.ndarray
    d_norm: np.ndarray
    w: np.ndarray
    z: np.ndarray
    v: np.ndarray


def _raw_eval(problem: ProblemInstance, X):
    with np.errstate(all="ignore"):
        F = np.asarray(problem.evaluate(X), dtype=float)
        J = np.asarray(problem.jacobian(X), dtype=float)
    ok = np.all(np.isfinite(F), axis=-1) & np.all(np.isfinite(J), axis=(-2, -1))
    if not ok.all():
        F = np.where(ok[..., None], F, 0.0)
        J = np.where(ok[..., None, None], J, 0.0)
    return F, J, ok


def _step_batch(problem, region, R, z_star, phi_lb, X, config: SolverConfig, k: int) -> _Batch:
    F, J, ok = _raw_eval(problem, X)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        rep = project_qplus(F, region)
    rho = np.asarray(rep.rho)
    G = np.asarray(rep.g_value)
    z = X - problem.decision_set.project(X)
    H = 0.5 * np.sum(z * z, axis=-1)
    terms = R * (F - z_star)
    i = np.argmax(terms, axis=-1)
    cheb = np.take_along_axis(terms, i[:, None], axis=-1)[:, 0]
    w = (np.take_along_axis(R, i[:, None], axis=-1)
         * np.take_along_axis(J, i[:, None, None], axis=-2)[:, 0, :])
    v = np.einsum("bmn,bm->bn", J, rho)
    delta = cheb - phi_lb
    indicator = delta >= 0
    d = config.alpha * indicator[:, None] * w + config.beta * z + config.gamma * v
    d_norm = np.linalg.norm(d, axis=-1)
    eta = np.maximum(config.mu, d_norm)
    lam = float(config.step_size(k))
    x_next = X - (lam / eta)[:, None] * d
    merit = config.alpha * np.maximum(delta, 0.0) + config.beta * H + config.gamma * G
    return _Batch(x_next, ok, F, cheb, delta, H, G, merit, eta, lam, indicator, d_norm, w, z, v)


@dataclass
class _CoreResult:
    x_best: np.ndarray
    merit_best: np.ndarray
    iterations: np.ndarray
    failed: np.ndarray
    traces: list | None


def _abp_core(problem, region, R, z_star, phi_lb, X0, config: SolverConfig,
              record: bool = False) -> _CoreResult:
    X = np.array(X0, dtype=float, copy=True)
    B = len(X)
    alive = np.ones(B, dtype=bool)
    failed = np.zeros(B, dtype=bool)
    streak = np.zeros(B, dtype=int)
    iterations = np.zeros(B, dtype=int)
    x_best = X.copy()
    merit_best = np.full(B, np.inf)
    chunks = []
    for k in range(config.max_iters):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        st = _step_batch(problem, region, R[idx], z_star, phi_lb[idx], X[idx], config, k)
        bad = idx[~st.ok]
        failed[bad] = True
        alive[bad] = False
        sel = st.ok
        good = idx[sel]
        merit = st.merit[sel]
        better = merit <= merit_best[good]
        x_best[good[better]] = X[good[better]]
        merit_best[good[better]] = merit[better]
        if record and good.size:
            chunks.append((good, k, X[good], st, sel))
        X[good] = st.x_next[sel]
        iterations[good] = k + 1
        streak[good] = np.where(merit < config.phi_tol, streak[good] + 1, 0)
        alive[good[streak[good] >= STOP_STREAK]] = False
    traces = _assemble_traces(chunks, B, X, problem, region, R, z_star, phi_lb, config) if record else None
    return _CoreResult(x_best, merit_best, iterations, failed, traces)


def _assemble_traces(chunks, B, X_final, problem, region, R, z_star, phi_lb, config):
    if not chunks:
        return [None] * B
    rows = np.concatenate([c[0] for c in chunks])
    cols = {
        "k": np.concatenate([np.full(len(c[0]), c[1]) for c in chunks]),
        "x": np.concatenate([c[2] for c in chunks]),
        "lam": np.concatenate([np.full(len(c[0]), c[3].lam) for c in chunks]),
    }
    for name in ("F", "cheb", "delta", "H", "G", "merit", "eta", "indicator", "d_norm"):
        cols[name] = np.concatenate([getattr(c[3], name)[c[4]] for c in chunks])
    traces = []
    for b in range(B):
        mask = rows == b
        traces.append(IterateTrace(**{name: cols[name][mask] for name in cols},
                                   x_last=X_final[b].copy(), problem=problem, region=region,
                                   r=R[b].copy(), z_star=np.asarray(z_star, dtype=float),
                                   phi_lb=float(phi_lb[b]), config=config))
    return traces


def abp_step(x, problem: ProblemInstance, region: ConstraintRegion, r, z_star, phi_lb: float,
             config: SolverConfig, k: int) -> tuple[np.ndarray, dict]:
    """One ABP iteration from ``x`` at iteration index ``k``.

    Returns the next point and a record holding every intermediate
    quantity (``p``, ``rho``, ``w``, ``z``, ``v``, ``d``, ``merit``, ...).
    """
    if k < 0:
        raise ParameterError("iteration index must be nonnegative")
    x = np.asarray(x, dtype=float).reshape(1, problem.n)
    r = check_preference(r, problem.m).reshape(1, -1)
    st = _step_batch(problem, region, r, np.asarray(z_star, dtype=float),
                     np.array([phi_lb], dtype=float), x, config, k)
    if not st.ok[0]:
        raise NumericError(f"{problem.name}: non-finite objective or Jacobian at iterate {k}")
    rep = project_qplus(st.F[0], region)
    d = config.alpha * st.indicator[0] * st.w[0] + config.beta * st.z[0] + config.gamma * st.v[0]
    record = {
        "k": k, "x": x[0].copy(), "F": st.F[0], "p": rep.p, "rho": rep.rho,
        "w": st.w[0], "z": st.z[0], "v": st.v[0], "d": d, "cheb": float(st.cheb[0]),
        "delta": float(st.delta[0]), "indicator": bool(st.indicator[0]), "H": float(st.H[0]),
        "G": float(st.G[0]), "merit": float(st.merit[0]), "eta": float(st.eta[0]),
        "lam": st.lam, "d_norm": float(st.d_norm[0]),
    }
    return st.x_next[0], record


def abp_solve(problem: ProblemInstance, region: ConstraintRegion, r, z_star, phi_lb: float,
              x0, config: SolverConfig, record_trace: bool = True):
    """Run ABP on one ray; returns ``(x_best, trace)``.

    Stops once the merit stays below ``phi_tol`` for 10 consecutive
    iterations or the budget runs out, and returns the visited iterate with
    the smallest merit (ties go to the later iterate). ``trace`` is None
    when ``record_trace`` is False. On a non-finite evaluation a
    :class:`NumericError` is raised carrying the partial trace in its
    ``trace`` attribute.
    """
    r = check_preference(r, problem.m)
    x0 = np.asarray(x0, dtype=float).reshape(1, problem.n)
    res = _abp_core(problem, region, r[None, :], np.asarray(z_star, dtype=float),
                    np.array([phi_lb], dtype=float), x0, config, record=record_trace)
    trace = res.traces[0] if record_trace else None
    if res.failed[0]:
        err = NumericError(f"{problem.name}: non-finite objective or Jacobian after "
                           f"{int(res.iterations[0])} iterations")
        err.trace = trace
        raise err
    return res.x_best[0], trace


def estimate_cq_step(problem: ProblemInstance, seed: int = 0, samples: int = CQ_SAMPLES) -> float:
    """``0.5 / L`` with ``L`` the largest sampled ``||J(x)||^2`` (spectral norm)."""
    rng = np.random.default_rng(seed)
    X = problem.decision_set.sample(rng, samples)
    _, J, ok = _raw_eval(problem, X)
    if not ok.any():
        raise NumericError(f"{problem.name}: Jacobian not finite at any sampled point")
    L = float(np.max(np.linalg.norm(J[ok], ord=2, axis=(-2, -1)) ** 2))
    return 0.5 / max(L, 1e-12)


def cq_solve(problem: ProblemInstance, region: ConstraintRegion, x0, step: float | None = None,
             max_iters: int = CQ_MAX_ITERS, tol: float = CQ_TOL, seed: int = 0):
    """CQ iteration for ``x in C, F(x) in Q+``; returns ``(x, converged)``.

    Stops as soon as ``G(x) < tol``. When the budget runs out the point with
    the smallest ``G`` seen is returned with ``converged=False``.
    """
    if step is None:
        step = estimate_cq_step(problem, seed)
    if not step > 0:
        raise ParameterError("CQ step must be positive")
    C = problem.decision_set
    x = C.project(np.asarray(x0, dtype=float))
    best_x, best_g = x.copy(), np.inf
    for _ in range(max_iters + 1):
        Fx = problem.values(x)
        rep = project_qplus(Fx, region)
        if rep.g_value < best_g:
            best_x, best_g = x.copy(), rep.g_value
        if rep.g_value < tol:
            return x, True
        x = C.project(x - step * problem.jac(x).T @ rep.rho)
    return best_x, False


def _lb_starts(problem: ProblemInstance, R, z_star, rng, starts: int) -> np.ndarray:
    C = problem.decision_set
    B = len(R)
    X = C.sample(rng, B * starts).reshape(B, starts, problem.n)
    seeds = None
    if isinstance(C, Box) and problem.n <= 2:
        axes = [np.linspace(lo, hi, LB_GRID) for lo, hi in zip(C.lower, C.upper)]
        seeds = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.n)
    elif isinstance(C, UnitSphereBox) and problem.n == 3:
        th, ph = np.meshgrid(np.linspace(0, np.pi, 200), np.linspace(-np.pi, np.pi, 400),
                             indexing="ij")
        seeds = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)],
                         axis=-1).reshape(-1, 3)
        seeds = seeds[C.contains(seeds)]
    if seeds is not None and len(seeds):
        F, _, ok = _raw_eval(problem, seeds)
        seeds, F = seeds[ok], F[ok]
        for b in range(B):
            X[b, 0] = seeds[np.argmin(chebyshev_value(F, R[b], z_star))]
    elif isinstance(C, Box):
        X[:, 0] = C.center
    return X


def lower_bounds(problem: ProblemInstance, rays, z_star, config: SolverConfig | None = None,
                 starts: int = LB_STARTS, iters: int = LB_ITERS) -> np.ndarray:
    """``inf_{x in C} phi(x)`` estimated for each ray in ``rays``.

    Multi-start projected subgradient with normalised directions and steps
    ``0.1 / (k+1)^0.75``, seeded from a dense grid when ``n <= 2`` (or a
    spherical grid for a 3-D sphere patch). The best visited point of each
    ray is then polished in epigraph form; the smaller value wins.
    """
    config = SolverConfig() if config is None else config
    R = check_preference(np.atleast_2d(rays), problem.m)
    z_star = np.asarray(z_star, dtype=float)
    C = problem.decision_set
    if not isinstance(C, (Box, UnitSphereBox)):
        raise ParameterError("lower bound needs a Box or UnitSphereBox decision set")
    rng = np.random.default_rng(config.seed)
    X = _lb_starts(problem, R, z_star, rng, starts)
    Rb = R[:, None, :]
    F, _, ok = _raw_eval(problem, X)
    vals = np.where(ok, chebyshev_value(F, Rb, z_star), np.inf)
    pick = np.argmin(vals, axis=1)
    best = vals[np.arange(len(R)), pick]
    best_x = X[np.arange(len(R)), pick].copy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in range(iters):
            F, J, ok = _raw_eval(problem, X)
            terms = Rb * (F - z_star)
            i = np.argmax(terms, axis=-1)
            w = (np.take_along_axis(np.broadcast_to(Rb, terms.shape), i[..., None], axis=-1)
                 * np.take_along_axis(J, i[..., None, None], axis=-2)[..., 0, :])
            norm = np.linalg.norm(w, axis=-1, keepdims=True)
            step = LB_STEP / (k + 1.0) ** LB_EXPONENT
            X = np.where(ok[..., None], C.project(X - step * w / np.maximum(norm, 1e-12)), X)
            F, _, ok = _raw_eval(problem, X)
            vals = np.where(ok, chebyshev_value(F, Rb, z_star), np.inf)
            pick = np.argmin(vals, axis=1)
            cand = vals[np.arange(len(R)), pick]
            upd = cand < best
            best = np.where(upd, cand, best)
            best_x[upd] = X[np.flatnonzero(upd), pick[upd]]
    out = best.copy()
    for b in range(len(R)):
        _, val = polish_chebyshev(problem, R[b], z_star, best_x[b])
        out[b] = min(out[b], val)
    return out


def lower_bound(problem: ProblemInstance, r, z_star, config: SolverConfig | None = None) -> float:
    """Scalar convenience wrapper around :func:`lower_bounds`."""
    r = check_preference(r, problem.m)
    return float(lower_bounds(problem, r[None, :], z_star, config)[0])


def two_phase_solve(problem: ProblemInstance, region: ConstraintRegion, rays,
                    config: SolverConfig | None = None, threads: int = 1,
                    record_trace: bool = False, x0=None) -> ParetoApproximation:
    """Phase 1 (CQ from the registered start) then ABP on every ray.

    Rays are split into ``threads`` contiguous chunks solved concurrently;
    rows never interact, so the result is the same for any thread count.
    """
    config = SolverConfig() if config is None else config
    R = check_preference(np.atleast_2d(rays), problem.m)
    if len(R) == 0:
        raise ParameterError("need at least one ray")
    if threads < 1:
        raise ParameterError("threads must be positive")
    z_star = compute_ideal_point(problem, seed=config.seed)
    start = problem.initial_point() if x0 is None else np.asarray(x0, dtype=float)
    x_feas, phase1_ok = cq_solve(problem, region, start, seed=config.seed)
    if not phase1_ok:
        warnings.warn(f"{problem.name}: Phase 1 did not reach Q+; continuing from best point",
                      ConvergenceWarning, stacklevel=2)
    phi_lb = lower_bounds(problem, R, z_star, config)
    X0 = np.tile(x_feas, (len(R), 1))

    chunks = np.array_split(np.arange(len(R)), min(threads, len(R)))
    run = lambda ids: _abp_core(problem, region, R[ids], z_star, phi_lb[ids], X0[ids],
                                config, record=record_trace)
    if len(chunks) == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(run, chunks))
    X = np.concatenate([p.x_best for p in parts])
    iterations = np.concatenate([p.iterations for p in parts])
    failed = np.concatenate([p.failed for p in parts])
    traces = sum((p.traces for p in parts), []) if record_trace else None

    Y, _, ok = _raw_eval(problem, X)
    Y = np.where(ok[:, None], Y, np.nan)
    status = ["numeric-error" if f else ("ok" if o else "non-finite") for f, o in zip(failed, ok)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        dist = np.where(ok, qplus_distance(np.nan_to_num(Y), region), np.inf)
    in_q = ok & membership_q(np.nan_to_num(Y, nan=np.inf), region)
    in_qplus = dist <= FEAS_TOL
    return ParetoApproximation(
        rays=R, x=X, y=Y, in_q=in_q, in_qplus=in_qplus,
        phi=np.where(ok, chebyshev_value(np.nan_to_num(Y), R, z_star), np.nan),
        g_value=0.5 * dist ** 2, phi_lb=phi_lb, iterations=iterations, status=status,
        problem=problem.name, region=region.describe(), z_star=z_star,
        phase1_converged=phase1_ok, x_feas=x_feas, traces=traces)
