"""Front quality and feasibility metrics: MED, hypervolume, feasibility rate and EFHV."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, UnsupportedError
from .geometry import ConstraintRegion, membership_q

MC_CHUNK = 200_000


def _fmt(v) -> str:
    return format(float(v), ".17g")


@dataclass
class ParetoApproximation:
    """Solver output: one row per preference ray, in ray order."""

    rays: np.ndarray
    x: np.ndarray
    y: np.ndarray
    in_q: np.ndarray
    in_qplus: np.ndarray
    phi: np.ndarray
    g_value: np.ndarray
    phi_lb: np.ndarray | None = None
    iterations: np.ndarray | None = None
    status: list = field(default_factory=list)
    problem: str = ""
    region: dict = field(default_factory=dict)
    z_star: np.ndarray | None = None
    phase1_converged: bool = True
    x_feas: np.ndarray | None = None
    traces: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(self.in_q & ~self.in_qplus):
            # Q is a subset of Q+; a point can only fail the computed Q+ test
            # through the membership tolerance, so trust the closed form.
            self.in_qplus = self.in_qplus | self.in_q

    def __len__(self) -> int:
        return len(self.rays)

    def failures(self) -> list[dict]:
        return [{"ray_index": i, "status": s} for i, s in enumerate(self.status) if s != "ok"]

    def header(self) -> list[str]:
        m, n = self.rays.shape[1], self.x.shape[1]
        return (["ray_index"] + [f"r{i}" for i in range(m)] + [f"x{i}" for i in range(n)]
                + [f"y{i}" for i in range(m)] + ["in_Q", "in_Qplus", "phi", "G"])

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(self.header())
            for k in range(len(self)):
                out.writerow([k] + [_fmt(v) for v in self.rays[k]] + [_fmt(v) for v in self.x[k]]
                             + [_fmt(v) for v in self.y[k]]
                             + [int(self.in_q[k]), int(self.in_qplus[k]),
                                _fmt(self.phi[k]), _fmt(self.g_value[k])])

    @classmethod
    def from_csv(cls, path) -> "ParetoApproximation":
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ParameterError(f"{path}: empty solutions file")
        head = rows[0]
        cols = {name: i for i, name in enumerate(head)}
        pick = lambda prefix: [i for name, i in cols.items()
                               if name[0] == prefix and name[1:].isdigit()]
        data = rows[1:]
        arr = lambda idx: np.array([[float(r[i]) for i in idx] for r in data]).reshape(len(data), len(idx))
        try:
            return cls(rays=arr(pick("r")), x=arr(pick("x")), y=arr(pick("y")),
                       in_q=np.array([r[cols["in_Q"]] == "1" for r in data], dtype=bool),
                       in_qplus=np.array([r[cols["in_Qplus"]] == "1" for r in data], dtype=bool),
                       phi=np.array([float(r[cols["phi"]]) for r in data]),
                       g_value=np.array([float(r[cols["G"]]) for r in data]),
                       status=["ok"] * len(data))
        except (KeyError, ValueError, IndexError) as exc:
            raise ParameterError(f"{path}: malformed solutions file ({exc})") from exc


@dataclass(frozen=True)
class MetricsReport:
    med: float
    med_pairs: int
    med_skipped: int
    hv_all: float
    hv_feasible: float
    pi: float
    efhv: float
    reference_point: tuple

    def to_dict(self) -> dict:
        return asdict(self) | {"reference_point": list(self.reference_point)}

    def to_json(self, **extra) -> str:
        return json.dumps(_round_trip(self.to_dict() | extra), indent=2, sort_keys=True)

    CSV_COLUMNS = ("med", "med_pairs", "med_skipped", "hv_all", "hv_feasible", "pi", "efhv")

    def csv_row(self) -> str:
        values = [getattr(self, c) for c in self.CSV_COLUMNS]
        return ",".join(str(v) if isinstance(v, int) else _fmt(v) for v in values)


def _round_trip(obj):
    """Replace floats by 17-digit decimal strings parsed back, for stable JSON."""
    if isinstance(obj, float):
        return float(_fmt(obj)) if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round_trip(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_trip(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round_trip(obj.item())
    return obj


def med(reference, predicted) -> float:
    """Mean Euclidean distance between index-paired vectors.

    Pairs where either side is ``None`` or contains NaN are skipped.
    """
    pairs = [(a, b) for a, b in zip(reference, predicted, strict=True)
             if a is not None and b is not None]
    diffs = [np.asarray(a, dtype=float) - np.asarray(b, dtype=float) for a, b in pairs]
    diffs = [d for d in diffs if np.all(np.isfinite(d))]
    if not diffs:
        raise ParameterError("MED needs at least one complete pair")
    return float(np.mean(np.linalg.norm(np.array(diffs), axis=-1)))


def _prepare(points, reference):
    ref = np.asarray(reference, dtype=float)
    if ref.ndim != 1:
        raise ParameterError("reference point must be a vector")
    if ref.size not in (2, 3):
        raise UnsupportedError(f"hypervolume supports m in {{2, 3}}, got m={ref.size}")
    pts = np.asarray(points, dtype=float).reshape(-1, ref.size)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    return pts[np.all(pts < ref, axis=1)], ref


def _hv2d(pts, ref) -> float:
    if len(pts) == 0:
        return 0.0
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    hv, floor = 0.0, ref[1]
    for a, b in pts:
        if b < floor:
            hv += (ref[0] - a) * (floor - b)
            floor = b
    return hv


def hypervolume(points, reference) -> float:
    """Exact volume dominated by ``points`` and bounded by ``reference``.

    Points that do not strictly dominate the reference are ignored. 2-D uses
    a sort-and-sweep; 3-D sums 2-D slices between successive third
    coordinates.
    """
    pts, ref = _prepare(points, reference)
    if ref.size == 2:
        return _hv2d(pts, ref)
    if len(pts) == 0:
        return 0.0
    pts = pts[np.argsort(pts[:, 2], kind="stable")]
    levels = np.append(pts[:, 2], ref[2])
    hv = 0.0
    for i in range(len(pts)):
        height = levels[i + 1] - levels[i]
        if height > 0:
            hv += height * _hv2d(pts[: i + 1, :2], ref[:2])
    return hv


def hypervolume_mc(points, reference, samples: int = 1_000_000, seed: int = 0,
                   return_se: bool = False):
    """Monte-Carlo hypervolume over the box spanned by the points and the reference.

    With ``return_se`` the standard error of the estimate is returned too.
    """
    pts, ref = _prepare(points, reference)
    if len(pts) == 0 or samples < 1:
        return (0.0, 0.0) if return_se else 0.0
    lo = pts.min(axis=0)
    vol = float(np.prod(ref - lo))
    rng = np.random.default_rng(seed)
    hits, done = 0, 0
    while done < samples:
        n = min(MC_CHUNK, samples - done)
        u = rng.uniform(lo, ref, size=(n, ref.size))
        dominated = np.zeros(n, dtype=bool)
        for p in pts:
            dominated |= np.all(u >= p, axis=1)
        hits += int(dominated.sum())
        done += n
    frac = hits / samples
    value = vol * frac
    se = vol * np.sqrt(frac * (1.0 - frac) / samples)
    return (value, float(se)) if return_se else value


def default_reference(m: int) -> np.ndarray:
    return np.full(m, 2.0)


def evaluate(approx: ParetoApproximation, ground_truth=None,
             region: ConstraintRegion | None = None, reference=None) -> MetricsReport:
    """Compute MED, HV of all and of feasible points, pi and EFHV.

    Feasibility for pi means membership in ``Q`` itself. When ``region`` is
    given it is recomputed in closed form; otherwise the stored flags are
    used. ``ground_truth`` is a list of objective vectors (or ``None``) in
    ray order; without it MED is reported as NaN.
    """
    Y = np.asarray(approx.y, dtype=float)
    m = Y.shape[1]
    ref = default_reference(m) if reference is None else np.asarray(reference, dtype=float)
    finite = np.all(np.isfinite(Y), axis=1)
    if region is not None:
        in_q = finite & membership_q(np.where(finite[:, None], Y, np.inf), region)
    else:
        in_q = np.asarray(approx.in_q, dtype=bool)
    pi = float(np.mean(in_q)) if len(Y) else 0.0
    hv_all = hypervolume(Y[finite], ref)
    hv_feas = hypervolume(Y[in_q], ref)
    if ground_truth is None:
        value, pairs, skipped = float("nan"), 0, len(Y)
    else:
        gt = list(ground_truth)
        usable = [g is not None and f for g, f in zip(gt, finite, strict=True)]
        pairs = int(sum(usable))
        skipped = len(gt) - pairs
        value = med([g for g, u in zip(gt, usable) if u], Y[np.array(usable, dtype=bool)]) if pairs else float("nan")
    return MetricsReport(med=value, med_pairs=pairs, med_skipped=skipped, hv_all=hv_all,
                         hv_feasible=hv_feas, pi=pi, efhv=pi * hv_feas,
                         reference_point=tuple(float(v) for v in ref))
