"""Primal-dual interior point method for smooth NLPs.

Solves ``min f(x)  s.t.  g(x) = 0,  h(x) <= 0`` with slacks ``h(x) + z = 0``,
``z > 0`` and a logarithmic barrier on ``z``.  Each iteration takes one
Newton step on the perturbed KKT conditions, reduced to the symmetric
system

    [ M     Jg^T ] [dx]   [ -N ]
    [ Jg    0    ] [dl] = [ -g ]

with ``M = Lxx + Jh^T diag(mu/z) Jh`` and ``N = Lx + Jh^T ((gamma + mu*h)/z)``.
The barrier parameter is shrunk whenever the barrier KKT error drops
below it, and steps obey the fraction-to-boundary rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .exceptions import Infeasible, NonConvergence


class NLP(Protocol):
    def initial_point(self) -> np.ndarray: ...
    def objective(self, x) -> float: ...
    def gradient(self, x) -> np.ndarray: ...
    def eq(self, x) -> np.ndarray: ...
    def eq_jacobian(self, x) -> sp.spmatrix: ...
    def ineq(self, x) -> np.ndarray: ...
    def ineq_jacobian(self, x) -> sp.spmatrix: ...
    def lagrangian_hessian(self, x, lam, mu) -> sp.spmatrix: ...


@dataclass(frozen=True)
class IPMOptions:
    kkt_tol: float = 1e-6
    max_iter: int = 200
    mu0: float = 0.1
    mu_shrink: float = 0.2
    tau: float = 0.995
    slack_margin: float = 1e-2
    dual_init: float = 1.0
    divergence_bound: float = 1e6
    # Complementarity is driven below comp_ratio * kkt_tol so binding bounds
    # end up within kkt_tol of their limit.
    comp_ratio: float = 1e-2

    def __post_init__(self):
        if not self.kkt_tol > 0.0:
            raise ValueError("kkt_tol must be positive")
        if not 0.0 < self.mu_shrink < 1.0:
            raise ValueError("mu_shrink must lie in (0, 1)")


@dataclass
class IPMResult:
    x: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    z: np.ndarray
    objective: float
    kkt: float
    iterations: int
    # (barrier parameter, objective, unperturbed KKT) recorded at each barrier reduction
    history: list[tuple[float, float, float]] = field(default_factory=list)


def kkt_blocks(nlp: NLP, x, lam, mu) -> dict[str, float]:
    """Infinity norms of the unperturbed first-order optimality blocks."""
    g = nlp.eq(x)
    h = nlp.ineq(x)
    Lx = nlp.gradient(x) + nlp.eq_jacobian(x).T @ lam
    if h.size:
        Lx = Lx + nlp.ineq_jacobian(x).T @ mu
    def inf(a):
        return float(np.max(np.abs(a))) if np.size(a) else 0.0
    return {
        "stationarity": inf(Lx),
        "primal": max(inf(g), float(np.max(h, initial=0.0))),
        "dual": float(np.max(-mu, initial=0.0)),
        "complementarity": inf(mu * h),
    }


def _solve_kkt(M, Jg, rhs):
    m = Jg.shape[0]
    K = sp.bmat([[M, Jg.T], [Jg, None]], format="csc")
    try:
        return splu(K).solve(rhs)
    except RuntimeError:
        pass
    # Singular: light primal-dual regularization.
    n = M.shape[0]
    delta = 1e-8 * max(1.0, abs(M).max())
    K = sp.bmat([[M + delta * sp.eye(n), Jg.T], [Jg, -delta * sp.eye(m)]], format="csc")
    try:
        return splu(K).solve(rhs)
    except RuntimeError as exc:
        raise Infeasible(f"KKT system is singular: {exc}") from None


def _step_length(v, dv, tau):
    neg = dv < 0.0
    if not np.any(neg):
        return 1.0
    return min(1.0, tau * float(np.min(-v[neg] / dv[neg])))


def solve(nlp: NLP, options: IPMOptions = IPMOptions()) -> IPMResult:
    x = np.asarray(nlp.initial_point(), dtype=float)
    h = nlp.ineq(x)
    g = nlp.eq(x)
    n_eq, n_in = g.size, h.size
    z = np.maximum(-h, options.slack_margin)
    mu = np.full(n_in, options.dual_init)
    lam = np.zeros(n_eq)
    gamma = options.mu0
    comp_tol = options.comp_ratio * options.kkt_tol
    gamma_floor = 0.1 * comp_tol
    history = []

    for it in range(options.max_iter + 1):
        grad = nlp.gradient(x)
        Jg = sp.csr_matrix(nlp.eq_jacobian(x))
        Jh = sp.csr_matrix(nlp.ineq_jacobian(x))
        Lx = grad + Jg.T @ lam + Jh.T @ mu

        blocks = kkt_blocks(nlp, x, lam, mu)
        kkt = max(blocks.values())
        if kkt <= options.kkt_tol and blocks["complementarity"] <= comp_tol:
            return IPMResult(x, lam, mu, z, float(nlp.objective(x)), kkt, it, history)
        if it == options.max_iter:
            break

        barrier_err = max(
            np.max(np.abs(Lx), initial=0.0),
            np.max(np.abs(g), initial=0.0),
            np.max(np.abs(h + z), initial=0.0),
            np.max(np.abs(mu * z - gamma), initial=0.0),
        )
        if barrier_err < gamma and gamma > gamma_floor:
            history.append((gamma, float(nlp.objective(x)), kkt))
            gamma = max(gamma * options.mu_shrink, gamma_floor)

        Lxx = sp.csr_matrix(nlp.lagrangian_hessian(x, lam, mu))
        zinv = 1.0 / z
        M = Lxx + Jh.T @ sp.diags(mu * zinv) @ Jh
        N = Lx + Jh.T @ ((gamma + mu * h) * zinv)
        sol = _solve_kkt(M.tocsc(), Jg.tocsc(), np.concatenate([-N, -g]))
        dx, dlam = sol[: x.size], sol[x.size :]
        dz = -h - z - Jh @ dx
        dmu = -mu + (gamma - mu * dz) * zinv

        ap = _step_length(z, dz, options.tau)
        ad = _step_length(mu, dmu, options.tau)
        x = x + ap * dx
        z = z + ap * dz
        lam = lam + ad * dlam
        mu = mu + ad * dmu

        bound = options.divergence_bound
        primal_ok = np.all(np.isfinite(x)) and np.max(np.abs(x)) < bound
        dual_ok = np.max(np.abs(lam), initial=0.0) < bound and np.max(mu, initial=0.0) < bound
        if not (primal_ok and dual_ok and np.min(z, initial=1.0) > 0.0):
            raise Infeasible(f"interior point iterates diverged at iteration {it + 1}")
        g = nlp.eq(x)
        h = nlp.ineq(x)

    if blocks["primal"] > 1e3 * options.kkt_tol:
        raise Infeasible(f"no feasible point found (primal infeasibility {blocks['primal']:.3e})")
    raise NonConvergence(options.max_iter, kkt)
