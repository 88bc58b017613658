import numpy as np
import pytest

from bssp.benchmarks import build_benchmark
from bssp.errors import UnsupportedError
from bssp.problem import Box, ProblemInstance, UnitSphereBox
from bssp.scalarization import (active_index, chebyshev_subgradient, chebyshev_value,
                                compute_ideal_point)

CVX1 = build_benchmark("CVX1").problem
CVX2 = build_benchmark("CVX2").problem


def test_value_examples():
    assert chebyshev_value([0.2, 0.4], [0.5, 0.5], [0, 0]) == pytest.approx(0.2)
    assert chebyshev_value([0.3, 0.1], [0.5, 0.5], [0.3, 0.1]) == 0.0
    assert chebyshev_value([1, 0], [0.25, 0.75], [0, 0]) == 0.25


def test_active_index_examples():
    assert active_index([0.2, 0.4], [0.5, 0.5], [0, 0]) == 1
    assert active_index([0.4, 0.4], [0.5, 0.5], [0, 0]) == 0
    assert active_index([0, 1, 2], [1 / 3] * 3, [0, 0, 0]) == 2


def test_subgradient_examples():
    np.testing.assert_allclose(chebyshev_subgradient([0.9], CVX1, [0.5, 0.5], [0, 0]), [0.5])
    np.testing.assert_allclose(chebyshev_subgradient([0.1], CVX1, [0.5, 0.5], [0, 0]), [-0.9])


def test_subgradient_batched():
    X = np.array([[0.9], [0.1]])
    np.testing.assert_allclose(chebyshev_subgradient(X, CVX1, [0.5, 0.5], [0, 0]), [[0.5], [-0.9]])


@pytest.mark.parametrize("problem", [CVX1, CVX2], ids=["CVX1", "CVX2"])
def test_subgradient_inequality(problem):
    rng = np.random.default_rng(3)
    box = problem.decision_set
    for _ in range(1000):
        r = rng.dirichlet([1, 1])
        x, y = box.sample(rng, 2)
        w = chebyshev_subgradient(x, problem, r, [0, 0])
        lhs = chebyshev_value(problem.values(y), r, [0, 0])
        rhs = chebyshev_value(problem.values(x), r, [0, 0]) + w @ (y - x)
        assert lhs >= rhs - 1e-10


@pytest.mark.parametrize("problem", [CVX1, CVX2], ids=["CVX1", "CVX2"])
def test_convexity_witness(problem):
    rng = np.random.default_rng(4)
    box = problem.decision_set
    r = np.array([0.3, 0.7])
    X, Y = box.sample(rng, 1000), box.sample(rng, 1000)
    lam = rng.uniform(size=(1000, 1))
    phi = lambda Z: chebyshev_value(problem.values(Z), r, [0, 0])
    assert np.all(phi(lam * X + (1 - lam) * Y)
                  <= lam[:, 0] * phi(X) + (1 - lam[:, 0]) * phi(Y) + 1e-10)


def test_registered_ideal_points():
    for name in ("CVX1", "CVX2", "ZDT1", "ZDT2"):
        np.testing.assert_array_equal(compute_ideal_point(build_benchmark(name).problem), [0, 0])


def test_numeric_ideal_point_matches_registered():
    stripped = ProblemInstance("cvx2", 2, 2, CVX2.evaluate, CVX2.jacobian, CVX2.decision_set)
    np.testing.assert_allclose(compute_ideal_point(stripped, starts=8, iters=500), [0, 0], atol=1e-8)


def test_numeric_ideal_point_cvx1():
    stripped = ProblemInstance("cvx1", 1, 2, CVX1.evaluate, CVX1.jacobian, CVX1.decision_set)
    np.testing.assert_allclose(compute_ideal_point(stripped, starts=4, iters=200), [0, 0], atol=1e-8)


def test_ideal_point_needs_box():
    S = UnitSphereBox(np.zeros(3), np.ones(3))
    prob = ProblemInstance("s", 3, 2, lambda x: x[..., :2], lambda x: np.eye(2, 3), S)
    with pytest.raises(UnsupportedError):
        compute_ideal_point(prob)


def test_cvx3_ideal_point_is_attained():
    spec = build_benchmark("CVX3")
    Fe = spec.problem.values(np.eye(3))
    # f1 at (0,0,1), f2 at (0,1,0), f3 at (1,0,0)
    np.testing.assert_allclose([Fe[2, 0], Fe[1, 1], Fe[0, 2]], spec.z_star, atol=1e-15)
    pts = spec.problem.decision_set.sample(np.random.default_rng(0), 5000)
    assert np.all(spec.problem.values(pts) >= spec.z_star - 1e-12)
