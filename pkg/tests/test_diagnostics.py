import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bssp.benchmarks import build_benchmark, ground_truth
from bssp.diagnostics import (check_lemma_suite, delta_gradient, delta_value, trace_from_points,
                              verify_gap)
from bssp.errors import ParameterError
from bssp.geometry import project_qplus
from bssp.solvers import SolverConfig, abp_solve, lower_bound

CVX1 = build_benchmark("CVX1")
CVX2 = build_benchmark("CVX2")


def _anchor(spec, x):
    rep = project_qplus(spec.problem.values(x), spec.region)
    return rep, (rep.p, rep.rho)


class TestSurrogate:
    def test_zero_residual_is_identically_zero(self):
        anchor = (np.array([0.3, 0.3]), np.zeros(2))
        assert delta_value([0.7], anchor, CVX1.problem) == 0.0
        np.testing.assert_array_equal(delta_gradient([0.7], anchor, CVX1.problem), [0.0])

    def test_hand_value(self):
        # F(0.9) = (0.9, 0.01), p = (0.6, 0.01), rho = (0.3, 0)
        anchor = (np.array([0.6, 0.01]), np.array([0.3, 0.0]))
        assert delta_value([0.9], anchor, CVX1.problem) == pytest.approx(0.045)
        assert delta_value([0.5], anchor, CVX1.problem) == 0.0
        np.testing.assert_allclose(delta_gradient([0.9], anchor, CVX1.problem), [0.3])

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 5), st.floats(0, 5))
    def test_anchor_agreement(self, a, b):
        x = np.array([a, b])
        rep, anchor = _anchor(CVX2, x)
        assert abs(delta_value(x, anchor, CVX2.problem) - rep.g_value) <= 1e-12
        v = CVX2.problem.jac(x).T @ rep.rho
        assert np.linalg.norm(delta_gradient(x, anchor, CVX2.problem) - v) <= 1e-10

    def test_minorant_on_samples(self):
        rng = np.random.default_rng(2)
        Y = CVX2.problem.decision_set.sample(rng, 1000)
        GY = project_qplus(CVX2.problem.values(Y), CVX2.region).g_value
        for x in CVX2.problem.decision_set.sample(rng, 30):
            _, anchor = _anchor(CVX2, x)
            assert np.all(delta_value(Y, anchor, CVX2.problem) <= GY + 1e-10)

    def test_batched_value(self):
        _, anchor = _anchor(CVX2, np.array([4.0, 4.0]))
        X = np.array([[4.0, 4.0], [1.0, 2.0]])
        out = delta_value(X, anchor, CVX2.problem)
        assert out.shape == (2,)
        assert out[1] == delta_value(X[1], anchor, CVX2.problem)


@pytest.fixture(scope="module")
def cvx1_run():
    r = np.array([0.5, 0.5])
    lb = lower_bound(CVX1.problem, r, [0, 0])
    cfg = CVX1.solver_config(max_iters=2000)
    x, trace = abp_solve(CVX1.problem, CVX1.region, r, [0, 0], lb, [0.5], cfg)
    x_star = ground_truth(CVX1, rays=[r]).x[0]
    return trace, x_star


class TestLemmaSuite:
    def test_real_trace_passes(self, cvx1_run):
        trace, x_star = cvx1_run
        report = check_lemma_suite(trace, x_star)
        assert report.ok, report.to_dict()
        assert report["minorant"].total == len(trace) * 100

    def test_corrupted_trace_fails(self, cvx1_run):
        trace, x_star = cvx1_run
        pts = np.vstack([trace.x, trace.x_last[None]]).copy()
        mid = len(pts) // 2
        pts[mid + 1] += 1.0
        bad = trace_from_points(pts[:-1], trace.problem, trace.region, trace.r, trace.z_star,
                                trace.phi_lb, trace.config, x_last=pts[-1])
        report = check_lemma_suite(bad, x_star)
        assert not report["lyapunov"].ok

    def test_unknown_check_name(self, cvx1_run):
        report = check_lemma_suite(*cvx1_run)
        with pytest.raises(KeyError):
            report["nope"]

    def test_empty_trace(self):
        with pytest.raises(ParameterError):
            check_lemma_suite(None, [0.5])


class TestGap:
    def test_cvx1_gap_report(self):
        rays = np.array([[0.5, 0.5], [0.05, 0.95], [0.95, 0.05]])
        rep = verify_gap(CVX1, rays=rays)
        # r = (1/2, 1/2) is unconstrained-optimal inside Q+; r = (0.95, 0.05) drives
        # t towards 0 where f2 = 1 leaves Q+, so that ray has a positive gap
        assert rep.sigma[0] == pytest.approx(0.0, abs=1e-9)
        assert rep.sigma[2] > 0.05
        assert rep.sigma_min >= -1e-9
        assert rep.zero_ray_count == int(rep.zero_gap.sum())
        d = rep.to_dict()
        assert d["ray_count"] == 3 and len(d["rays"]) == 3
