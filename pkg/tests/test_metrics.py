import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bssp.errors import ParameterError, UnsupportedError
from bssp.geometry import BallRegion
from bssp.metrics import ParetoApproximation, evaluate, hypervolume, hypervolume_mc, med


def brute_hv(points, ref):
    """Inclusion-exclusion over all subsets; only for tiny inputs."""
    pts = [p for p in np.asarray(points, dtype=float) if np.all(p < ref)]
    total = 0.0
    for k in range(1, len(pts) + 1):
        for combo in itertools.combinations(pts, k):
            corner = np.max(combo, axis=0)
            total += (-1) ** (k + 1) * np.prod(ref - corner)
    return total


class TestMED:
    def test_hand_cases(self):
        assert med([[0, 0], [1, 1]], [[3, 4], [1, 1]]) == 2.5
        assert med([[0, 0, 0]], [[1, 2, 2]]) == 3.0
        assert med([[1, 1]], [[1, 1]]) == 0.0

    def test_skips_missing(self):
        assert med([[0, 0], None, [0, 0]], [[3, 4], [9, 9], [np.nan, 0]]) == 5.0

    def test_empty(self):
        with pytest.raises(ParameterError):
            med([None], [[0, 0]])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            med([[0, 0]], [[0, 0], [1, 1]])


class TestHypervolume:
    def test_hand_cases(self):
        assert hypervolume([[1, 1]], [2, 2]) == 1.0
        assert hypervolume([[0, 1], [1, 0]], [2, 2]) == 3.0
        assert hypervolume([[0, 0, 0]], [1, 2, 3]) == 6.0
        assert hypervolume([[3, 3]], [2, 2]) == 0.0
        assert hypervolume(np.empty((0, 2)), [2, 2]) == 0.0

    def test_dominated_and_duplicate_points_ignored(self):
        base = [[0, 1], [1, 0]]
        assert hypervolume(base + [[1.5, 1.5], [0, 1]], [2, 2]) == hypervolume(base, [2, 2])

    def test_unsupported_dimension(self):
        with pytest.raises(UnsupportedError):
            hypervolume([[0, 0, 0, 0]], [1, 1, 1, 1])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 3), st.lists(st.lists(st.floats(0, 1.9), min_size=3, max_size=3),
                                        min_size=1, max_size=6))
    def test_against_inclusion_exclusion(self, m, rows):
        pts = np.array(rows)[:, :m]
        ref = np.full(m, 2.0)
        assert hypervolume(pts, ref) == pytest.approx(brute_hv(pts, ref), rel=1e-9, abs=1e-12)

    def test_monte_carlo_agrees(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 1, size=(8, 3))
        value, se = hypervolume_mc(pts, [1.5, 1.5, 1.5], samples=200_000, return_se=True)
        assert abs(value - hypervolume(pts, [1.5, 1.5, 1.5])) <= 4 * se


def _approx(y, in_q):
    y = np.asarray(y, dtype=float)
    K = len(y)
    return ParetoApproximation(rays=np.full((K, 2), 0.5), x=np.zeros((K, 1)), y=y,
                               in_q=np.asarray(in_q), in_qplus=np.ones(K, dtype=bool),
                               phi=np.zeros(K), g_value=np.zeros(K), status=["ok"] * K)


class TestEvaluate:
    def test_efhv_identity(self):
        rep = evaluate(_approx([[0.5, 0.5], [0.1, 1.2], [1.0, 0.2]], [True, False, True]))
        assert rep.pi == 2 / 3
        assert rep.hv_feasible == hypervolume([[0.5, 0.5], [1.0, 0.2]], [2, 2])
        assert rep.efhv == rep.pi * rep.hv_feasible
        assert np.isnan(rep.med)

    def test_region_recomputes_feasibility(self):
        approx = _approx([[0.4, 0.4], [1.0, 1.0]], [False, False])
        rep = evaluate(approx, ground_truth=[[0.4, 0.4], None], region=BallRegion([0.4, 0.4], 0.2))
        assert rep.pi == 0.5
        assert rep.med == 0.0 and rep.med_pairs == 1 and rep.med_skipped == 1

    def test_csv_round_trip(self, tmp_path):
        approx = _approx([[1 / 3, 0.1 + 0.2]], [True])
        approx.to_csv(tmp_path / "s.csv")
        back = ParetoApproximation.from_csv(tmp_path / "s.csv")
        np.testing.assert_array_equal(back.y, approx.y)
        assert back.in_q.tolist() == [True]

    def test_malformed_csv(self, tmp_path):
        (tmp_path / "s.csv").write_text("ray_index,r0\n0,abc\n")
        with pytest.raises(ParameterError):
            ParetoApproximation.from_csv(tmp_path / "s.csv")
