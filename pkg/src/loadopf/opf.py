"""AC optimal power flow over current-injection constraints.

Decision vector ``x = [v_r (n), v_i (n), p_g (ng), q_g (ng)]``.

* objective: sum of generator cost polynomials ``c2 p^2 + c1 p + c0``
* equalities: real and imaginary current mismatch at every bus, with the
  load-model currents and generator injections ``(p - jq) V / |V|^2``,
  plus ``v_i = 0`` at the slack bus (angle reference)
* inequalities: ``v_min^2 <= |V|^2 <= v_max^2`` per bus and finite
  generator P/Q boxes

Every generator is dispatchable; bus kinds only pick the angle reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import ipm
from .loads import OperatingVoltage, injection_terms, nominal_power
from .network import GridCase, validate_case
from .powerflow import CompiledGrid

LOWER, UPPER, INTERIOR = "lower", "upper", "interior"


@dataclass(frozen=True)
class OPFOptions:
    kkt_tol: float = 1e-6
    max_iter: int = 200
    mu0: float = 0.1
    mu_shrink: float = 0.2
    tau: float = 0.995

    def __post_init__(self):
        if not self.kkt_tol > 0.0:
            raise ValueError("kkt_tol must be positive")
        if not 0.0 < self.mu_shrink < 1.0:
            raise ValueError("mu_shrink must lie in (0, 1)")

    def ipm_options(self) -> ipm.IPMOptions:
        return ipm.IPMOptions(
            kkt_tol=self.kkt_tol, max_iter=self.max_iter, mu0=self.mu0, mu_shrink=self.mu_shrink, tau=self.tau
        )


@dataclass
class StateVector:
    bus_ids: tuple[int, ...]
    v_r: np.ndarray
    v_i: np.ndarray
    p_g: np.ndarray
    q_g: np.ndarray

    @property
    def v(self) -> np.ndarray:
        return self.v_r + 1j * self.v_i

    @property
    def vm(self) -> np.ndarray:
        return np.hypot(self.v_r, self.v_i)

    def voltage(self, bus_id: int) -> OperatingVoltage:
        k = self.bus_ids.index(bus_id)
        return OperatingVoltage(float(self.v_r[k]), float(self.v_i[k]))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.v_r, self.v_i, self.p_g, self.q_g])


@dataclass
class OPFSolution:
    x: StateVector
    objective: float
    kkt_residual: float
    multipliers: dict[str, np.ndarray]
    bound_activity: dict[str, dict]
    iterations: int = 0
    history: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def total_generation(self) -> float:
        return float(np.sum(self.x.p_g))

    def as_dict(self) -> dict:
        x = self.x
        return {
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "buses": [
                {"id": b, "v_r": float(x.v_r[k]), "v_i": float(x.v_i[k]), "vm": float(x.vm[k])}
                for k, b in enumerate(x.bus_ids)
            ],
            "p_g": x.p_g.tolist(),
            "q_g": x.q_g.tolist(),
            "bound_activity": {
                "vm": {str(k): v for k, v in self.bound_activity["vm"].items()},
                "p_g": list(self.bound_activity["p_g"]),
                "q_g": list(self.bound_activity["q_g"]),
            },
        }


class OPFProblem:
    """The OPF as an NLP consumable by :func:`loadopf.ipm.solve`."""

    def __init__(self, case: GridCase):
        self.case = validate_case(case)
        self.grid = CompiledGrid(case)
        n, ng = self.grid.n, len(case.generators)
        self.n, self.ng = n, ng
        self.nx = 2 * n + 2 * ng
        self.gen_bus = np.array([self.grid.index[g.bus] for g in case.generators], dtype=int)
        self.c2 = np.array([g.cost[0] for g in case.generators], dtype=float)
        self.c1 = np.array([g.cost[1] for g in case.generators], dtype=float)
        self.c0 = np.array([g.cost[2] for g in case.generators], dtype=float)
        self.v_min = np.array([b.v_min for b in case.buses])
        self.v_max = np.array([b.v_max for b in case.buses])

        # Inequality rows: (label, index, side, bound value).
        rows = []
        for k in range(n):
            rows.append(("vm", k, UPPER, self.v_max[k]))
            rows.append(("vm", k, LOWER, self.v_min[k]))
        for j, gen in enumerate(case.generators):
            for attr, lo, hi in (("p_g", gen.p_min, gen.p_max), ("q_g", gen.q_min, gen.q_max)):
                if math.isfinite(hi):
                    rows.append((attr, j, UPPER, hi))
                if math.isfinite(lo):
                    rows.append((attr, j, LOWER, lo))
        self.ineq_rows = rows

    # -- layout helpers
    def split(self, x):
        n, ng = self.n, self.ng
        return x[:n], x[n : 2 * n], x[2 * n : 2 * n + ng], x[2 * n + ng :]

    def _var(self, attr, j):
        n, ng = self.n, self.ng
        return {"p_g": 2 * n + j, "q_g": 2 * n + ng + j}[attr]

    def bus_injection(self, p, q):
        P = np.bincount(self.gen_bus, weights=p, minlength=self.n) if self.ng else np.zeros(self.n)
        Q = np.bincount(self.gen_bus, weights=q, minlength=self.n) if self.ng else np.zeros(self.n)
        return P, Q

    def initial_point(self) -> np.ndarray:
        case = self.case
        vr = np.clip(np.ones(self.n), self.v_min, self.v_max)
        if np.any((vr <= self.v_min) | (vr >= self.v_max)):
            vr = 0.5 * (self.v_min + self.v_max)
        vi = np.zeros(self.n)
        p_load = q_load = 0.0
        for ld in case.loads:
            p, q = nominal_power(ld.model)
            p_load += p
            q_load += q
        p = np.zeros(self.ng)
        q = np.zeros(self.ng)
        if self.ng:
            p_max = np.array([g.p_max for g in case.generators])
            p_min = np.array([g.p_min for g in case.generators])
            q_max = np.array([g.q_max for g in case.generators])
            q_min = np.array([g.q_min for g in case.generators])
            share = p_max / p_max.sum() if np.all(np.isfinite(p_max)) and p_max.sum() > 0 else np.full(self.ng, 1 / self.ng)
            p = _interior_clip(p_load * share, p_min, p_max)
            q = _interior_clip(q_load * share, q_min, q_max)
        return np.concatenate([vr, vi, p, q])

    def state(self, x) -> StateVector:
        vr, vi, p, q = self.split(np.asarray(x, dtype=float))
        return StateVector(self.grid.bus_ids, vr.copy(), vi.copy(), p.copy(), q.copy())

    # -- objective
    def objective(self, x) -> float:
        _, _, p, _ = self.split(x)
        return float(np.sum(self.c2 * p * p + self.c1 * p + self.c0))

    def gradient(self, x) -> np.ndarray:
        _, _, p, _ = self.split(x)
        out = np.zeros(self.nx)
        out[2 * self.n : 2 * self.n + self.ng] = 2.0 * self.c2 * p + self.c1
        return out

    # -- equalities
    def eq(self, x) -> np.ndarray:
        vr, vi, p, q = self.split(x)
        V = vr + 1j * vi
        P, Q = self.bus_injection(p, q)
        mis = self.grid.mismatch(V, P, Q)
        return np.concatenate([mis.real, mis.imag, [vi[self.grid.slack]]])

    def eq_jacobian(self, x) -> sp.csr_matrix:
        n, ng = self.n, self.ng
        vr, vi, p, q = self.split(x)
        V = vr + 1j * vi
        P, Q = self.bus_injection(p, q)
        Ji = self.grid.mismatch_jacobian(V, P, Q)  # interleaved 2n x 2n
        perm = np.concatenate([np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)])
        Jv = Ji[perm][:, perm]
        s = vr * vr + vi * vi
        j = np.arange(ng)
        k = self.gen_bus
        dpq = sp.csr_matrix(
            (
                np.concatenate([-vr[k] / s[k], -vi[k] / s[k], -vi[k] / s[k], vr[k] / s[k]]),
                (np.concatenate([k, n + k, k, n + k]), np.concatenate([j, j, ng + j, ng + j])),
            ),
            shape=(2 * n, 2 * ng),
        )
        ref = sp.csr_matrix(([1.0], ([0], [n + self.grid.slack])), shape=(1, self.nx))
        return sp.vstack([sp.hstack([Jv, dpq]), ref], format="csr")

    # -- inequalities
    def ineq(self, x) -> np.ndarray:
        vr, vi, _, _ = self.split(x)
        vm2 = vr * vr + vi * vi
        out = np.empty(len(self.ineq_rows))
        for r, (attr, k, side, bound) in enumerate(self.ineq_rows):
            val = vm2[k] if attr == "vm" else x[self._var(attr, k)]
            lim = bound * bound if attr == "vm" else bound
            out[r] = val - lim if side == UPPER else lim - val
        return out

    def ineq_jacobian(self, x) -> sp.csr_matrix:
        vr, vi, _, _ = self.split(x)
        rows, cols, vals = [], [], []
        for r, (attr, k, side, _) in enumerate(self.ineq_rows):
            sign = 1.0 if side == UPPER else -1.0
            if attr == "vm":
                rows += [r, r]
                cols += [k, self.n + k]
                vals += [sign * 2.0 * vr[k], sign * 2.0 * vi[k]]
            else:
                rows.append(r)
                cols.append(self._var(attr, k))
                vals.append(sign)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(self.ineq_rows), self.nx))

    # -- second order
    def lagrangian_hessian(self, x, lam, mu) -> sp.csr_matrix:
        n, ng = self.n, self.ng
        vr, vi, p, q = self.split(x)
        P, Q = self.bus_injection(p, q)
        rows, cols, vals = [], [], []

        def put(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        def put_block(k, H):
            idx = (k, n + k)
            for a in range(2):
                for b in range(2):
                    put(idx[a], idx[b], H[a, b])

        for j in range(ng):
            put(2 * n + j, 2 * n + j, 2.0 * self.c2[j])

        w_r, w_i = lam[:n], lam[n : 2 * n]
        for k, model in self.grid.loads:
            put_block(k, model.current_hessian(vr[k], vi[k], w_r[k], w_i[k]))
        gen_terms = {}
        for k in np.unique(self.gen_bus):
            (u, gu, hu), (w, gw, hw) = injection_terms(vr[k], vi[k], w_r[k], w_i[k])
            put_block(k, -(P[k] * hu + Q[k] * hw))
            gen_terms[k] = (gu, gw)
        for j, k in enumerate(self.gen_bus):
            gu, gw = gen_terms[k]
            for a, vidx in enumerate((k, n + k)):
                for col, g in ((2 * n + j, -gu[a]), (2 * n + ng + j, -gw[a])):
                    put(vidx, col, g)
                    put(col, vidx, g)

        for r, (attr, k, side, _) in enumerate(self.ineq_rows):
            if attr == "vm":
                c = 2.0 * mu[r] * (1.0 if side == UPPER else -1.0)
                put(k, k, c)
                put(n + k, n + k, c)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.nx, self.nx))

    # -- reporting
    def bound_activity(self, x, tol) -> dict[str, dict]:
        st = self.state(x)
        vm = st.vm
        out = {"vm": {}, "p_g": [INTERIOR] * self.ng, "q_g": [INTERIOR] * self.ng}
        for k, b in enumerate(self.grid.bus_ids):
            out["vm"][b] = _activity(vm[k], self.v_min[k], self.v_max[k], tol)
        for j, gen in enumerate(self.case.generators):
            out["p_g"][j] = _activity(st.p_g[j], gen.p_min, gen.p_max, tol)
            out["q_g"][j] = _activity(st.q_g[j], gen.q_min, gen.q_max, tol)
        return out


def _interior_clip(v, lo, hi):
    lo_in = np.where(np.isfinite(lo) & np.isfinite(hi), lo + 0.1 * (hi - lo), lo)
    hi_in = np.where(np.isfinite(lo) & np.isfinite(hi), hi - 0.1 * (hi - lo), hi)
    return np.clip(v, lo_in, hi_in)


def _activity(value, lo, hi, tol) -> str:
    if math.isfinite(hi) and value >= hi - tol:
        return UPPER
    if math.isfinite(lo) and value <= lo + tol:
        return LOWER
    return INTERIOR


def solve_opf(case: GridCase, options: OPFOptions = OPFOptions()) -> OPFSolution:
    """Minimize generation cost subject to the network and operating limits."""
    problem = OPFProblem(case)
    if problem.ng == 0:
        raise ValueError("OPF needs at least one generator")
    res = ipm.solve(problem, options.ipm_options())
    return OPFSolution(
        x=problem.state(res.x),
        objective=res.objective,
        kkt_residual=res.kkt,
        multipliers={"equality": res.lam, "inequality": res.mu},
        bound_activity=problem.bound_activity(res.x, options.kkt_tol),
        iterations=res.iterations,
        history=res.history,
    )


def kkt_blocks(case: GridCase, candidate: OPFSolution) -> dict[str, float]:
    problem = OPFProblem(case)
    x = candidate.x.flat()
    if x.size != problem.nx:
        raise ValueError("candidate dimensions do not match the case")
    return ipm.kkt_blocks(problem, x, candidate.multipliers["equality"], candidate.multipliers["inequality"])


def kkt_residual(case: GridCase, candidate: OPFSolution) -> float:
    """Infinity norm over stationarity, primal/dual feasibility and complementarity."""
    return max(kkt_blocks(case, candidate).values())
