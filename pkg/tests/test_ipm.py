import numpy as np
import pytest
import scipy.sparse as sp

from loadopf import ipm
from loadopf.exceptions import Infeasible


class QP:
    """min (x0-2)^2 + (x1-1)^2  s.t.  x0 + x1 = 1,  x0 <= cap."""

    def __init__(self, cap):
        self.cap = cap

    def initial_point(self):
        return np.zeros(2)

    def objective(self, x):
        return (x[0] - 2) ** 2 + (x[1] - 1) ** 2

    def gradient(self, x):
        return np.array([2 * (x[0] - 2), 2 * (x[1] - 1)])

    def eq(self, x):
        return np.array([x[0] + x[1] - 1])

    def eq_jacobian(self, x):
        return sp.csr_matrix([[1.0, 1.0]])

    def ineq(self, x):
        return np.array([x[0] - self.cap])

    def ineq_jacobian(self, x):
        return sp.csr_matrix([[1.0, 0.0]])

    def lagrangian_hessian(self, x, lam, mu):
        return sp.identity(2, format="csr") * 2.0


def test_inactive_bound():
    res = ipm.solve(QP(5.0))
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-6)
    assert res.mu[0] == pytest.approx(0.0, abs=1e-6)
    assert res.kkt <= 1e-6


def test_active_bound_and_multiplier():
    res = ipm.solve(QP(0.8))
    np.testing.assert_allclose(res.x, [0.8, 0.2], atol=1e-7)
    # Stationarity: 2(x0-2) + lam + mu = 0 and 2(x1-1) + lam = 0.
    assert res.lam[0] == pytest.approx(1.6, abs=1e-6)
    assert res.mu[0] == pytest.approx(0.8, abs=1e-6)
    blocks = ipm.kkt_blocks(QP(0.8), res.x, res.lam, res.mu)
    assert max(blocks.values()) <= 1e-6


def test_history_objective_is_monotone():
    res = ipm.solve(QP(0.8))
    obj = [h[1] for h in res.history]
    assert len(obj) >= 2
    assert all(b <= a + 1e-9 for a, b in zip(obj, obj[1:]))


class Empty(QP):
    """min x0^2 + x1^2 s.t. x0 = 1, x0 <= 0."""

    def objective(self, x):
        return x @ x

    def gradient(self, x):
        return 2 * x

    def eq(self, x):
        return np.array([x[0] - 1.0])

    def eq_jacobian(self, x):
        return sp.csr_matrix([[1.0, 0.0]])


def test_infeasible_problem_raises():
    with pytest.raises(Infeasible):
        ipm.solve(Empty(0.0), ipm.IPMOptions(max_iter=60))


def test_options_validated():
    with pytest.raises(ValueError):
        ipm.IPMOptions(mu_shrink=1.0)
    with pytest.raises(ValueError):
        ipm.IPMOptions(kkt_tol=0.0)
