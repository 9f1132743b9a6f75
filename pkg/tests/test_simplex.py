"""LP solver checks, including random problems against scipy."""

import numpy as np
import pytest
from scipy.optimize import linprog

from tsgan import simplex


def test_simple_vertex():
    x, obj = simplex.solve_lp(
        c=[-1.0, -1.0], a_ub=[[1.0, 1.0]], b_ub=[1.0])
    assert obj == pytest.approx(-1.0, abs=1e-9)
    assert x.sum() == pytest.approx(1.0, abs=1e-9)


def test_phase_one_needed():
    # min x s.t. x >= 1
    x, obj = simplex.solve_lp(c=[1.0], a_ub=[[-1.0]], b_ub=[-1.0])
    assert obj == pytest.approx(1.0, abs=1e-9)


def test_infeasible():
    with pytest.raises(simplex.Infeasible):
        simplex.solve_lp(c=[1.0], a_ub=[[1.0], [-1.0]], b_ub=[-2.0, 1.0])


def test_unbounded():
    with pytest.raises(simplex.Unbounded):
        simplex.solve_lp(c=[-1.0, 0.0], a_ub=[[0.0, 1.0]], b_ub=[1.0])


def test_degenerate_ties_terminate():
    # several ties in the ratio test; Bland's rule must still terminate
    a = [[1.0, 0.0], [1.0, 0.0], [1.0, 1.0]]
    b = [1.0, 1.0, 1.0]
    x, obj = simplex.solve_lp([-2.0, -1.0], a, b)
    assert obj == pytest.approx(-2.0, abs=1e-9)


def test_random_problems_match_scipy():
    rng = np.random.default_rng(0)
    for trial in range(40):
        n = int(rng.integers(2, 8))
        m = int(rng.integers(1, 10))
        a = rng.normal(size=(m, n))
        x0 = rng.uniform(0, 1, size=n)
        b = a @ x0 + rng.uniform(0.01, 1.0, size=m)  # strictly feasible at x0
        # cap the feasible set so the problem is bounded
        a = np.vstack([a, np.ones(n)])
        b = np.append(b, x0.sum() + 5.0)
        c = rng.normal(size=n)
        x, obj = simplex.solve_lp(c, a, b)
        assert np.all(a @ x <= b + 1e-7), f"trial {trial}: infeasible output"
        assert np.all(x >= -1e-9)
        ref = linprog(c, A_ub=a, b_ub=b, bounds=(0, None), method="highs")
        assert ref.success
        assert obj == pytest.approx(ref.fun, abs=1e-7), f"trial {trial}"
