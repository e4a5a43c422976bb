"""AC power flow on rectangular nodal current-injection residuals.

Unknowns are the real and imaginary bus voltages of every non-slack bus,
plus the reactive output of every voltage-controlled (PV) bus.  For bus k
the residual is the complex current mismatch

    (Y V)_k + I_load,k(V_k) - (P_k - j Q_k) V_k / |V_k|^2

split into real and imaginary rows.  PV buses add ``|V_k|^2 - V_set^2``.
BIG and Y loads contribute affine terms, so a network with only those
loads and no PV buses is solved by a single Newton step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .exceptions import NonConvergence, VoltageCollapse
from .loads import OperatingVoltage, PQParams
from .network import GENERATOR, GridCase, build_admittance, validate_case

log = logging.getLogger(__name__)

LOW_VOLTAGE_FLAG = 0.5


@dataclass(frozen=True)
class PFOptions:
    tol: float = 1e-9
    max_iter: int = 30
    v_init: float = 1.0
    enforce_q_limits: bool = True
    max_halvings: int = 6

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class PFSolution:
    bus_ids: tuple[int, ...]
    v: np.ndarray
    slack_injection: tuple[float, float]
    gen_p: np.ndarray
    gen_q: np.ndarray
    iterations: int
    residual: float
    warnings: list[str] = field(default_factory=list)
    # bus id -> "q_min" / "q_max" for PV buses left at a reactive limit
    at_q_limit: dict[int, str] = field(default_factory=dict)

    @property
    def vm(self) -> np.ndarray:
        return np.abs(self.v)

    def voltage(self, bus_id: int) -> OperatingVoltage:
        return OperatingVoltage.from_complex(self.v[self.bus_ids.index(bus_id)])

    @property
    def total_generation(self) -> float:
        return float(np.sum(self.gen_p))

    def as_dict(self) -> dict:
        return {
            "buses": [
                {"id": b, "v_r": float(v.real), "v_i": float(v.imag), "vm": float(abs(v))}
                for b, v in zip(self.bus_ids, self.v)
            ],
            "slack_injection": list(self.slack_injection),
            "gen_p": self.gen_p.tolist(),
            "gen_q": self.gen_q.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
            "warnings": list(self.warnings),
            "at_q_limit": {str(k): v for k, v in self.at_q_limit.items()},
        }


class CompiledGrid:
    """Index maps and admittance for one validated case.  Read-only."""

    def __init__(self, case: GridCase):
        self.case = case
        self.index = case.bus_index()
        self.n = len(case.buses)
        self.bus_ids = tuple(case.bus_ids)
        Y = build_admittance(case)
        self.Y = Y.Y
        self.G = Y.G
        self.B = Y.B
        self.slack = self.index[case.slack.id]
        self.loads = [(self.index[ld.bus], ld.model) for ld in case.loads]
        self.gens_at: dict[int, list[int]] = {}
        for g, gen in enumerate(case.generators):
            self.gens_at.setdefault(self.index[gen.bus], []).append(g)
        # Interleaved real block [[G, -B], [B, G]] of the network current.
        coo = self.Y.tocoo()
        r, c, g, b = coo.row, coo.col, coo.data.real, coo.data.imag
        rows = np.concatenate([2 * r, 2 * r, 2 * r + 1, 2 * r + 1])
        cols = np.concatenate([2 * c, 2 * c + 1, 2 * c, 2 * c + 1])
        vals = np.concatenate([g, -b, b, g])
        self.Y_real = sp.csr_matrix((vals, (rows, cols)), shape=(2 * self.n, 2 * self.n))

    def load_currents(self, V: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n, dtype=complex)
        for k, model in self.loads:
            try:
                i_r, i_i = model.current(V[k].real, V[k].imag)
            except VoltageCollapse as exc:
                raise VoltageCollapse(exc.magnitude, self.bus_ids[k]) from None
            out[k] += complex(i_r, i_i)
        return out

    def mismatch(self, V: np.ndarray, p_inj: np.ndarray, q_inj: np.ndarray) -> np.ndarray:
        """Complex current mismatch at every bus for fixed power injections."""
        out = self.Y @ V + self.load_currents(V)
        nz = (p_inj != 0.0) | (q_inj != 0.0)
        if np.any(nz):
            out[nz] -= (p_inj[nz] - 1j * q_inj[nz]) * V[nz] / np.abs(V[nz]) ** 2
        return out

    def mismatch_jacobian(self, V: np.ndarray, p_inj: np.ndarray, q_inj: np.ndarray) -> sp.csr_matrix:
        """Interleaved real Jacobian of :meth:`mismatch` w.r.t. (v_r, v_i)."""
        rows, cols, vals = [], [], []

        def add_block(k, block):
            rows.extend([2 * k, 2 * k, 2 * k + 1, 2 * k + 1])
            cols.extend([2 * k, 2 * k + 1, 2 * k, 2 * k + 1])
            vals.extend(np.asarray(block).ravel())

        for k, model in self.loads:
            try:
                add_block(k, model.current_jacobian(V[k].real, V[k].imag))
            except VoltageCollapse as exc:
                raise VoltageCollapse(exc.magnitude, self.bus_ids[k]) from None
        for k in np.flatnonzero((p_inj != 0.0) | (q_inj != 0.0)):
            # Injection of (P, Q) is a PQ load drawing (-P, -Q).
            add_block(k, PQParams(-p_inj[k], -q_inj[k]).current_jacobian(V[k].real, V[k].imag))
        loads = sp.csr_matrix((vals, (rows, cols)), shape=(2 * self.n, 2 * self.n))
        return (self.Y_real + loads).tocsr()


def _as_voltages(grid: CompiledGrid, v) -> np.ndarray:
    V = np.asarray(v, dtype=complex).ravel()
    if V.size != grid.n:
        raise ValueError(f"expected {grid.n} bus voltages, got {V.size}")
    return V


def _fixed_injections(grid: CompiledGrid, gen_q=None):
    """Per-bus generator (P, Q) using p_set and the given per-generator Q."""
    gens = grid.case.generators
    gen_q = np.zeros(len(gens)) if gen_q is None else np.asarray(gen_q, dtype=float)
    p_inj = np.zeros(grid.n)
    q_inj = np.zeros(grid.n)
    for g, gen in enumerate(gens):
        k = grid.index[gen.bus]
        p_inj[k] += gen.p_set
        q_inj[k] += gen_q[g]
    p_inj[grid.slack] = q_inj[grid.slack] = 0.0
    return p_inj, q_inj


def _interleave(z: np.ndarray) -> np.ndarray:
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def _non_slack_rows(grid: CompiledGrid) -> np.ndarray:
    keep = [k for k in range(grid.n) if k != grid.slack]
    return np.array([[2 * k, 2 * k + 1] for k in keep], dtype=int).ravel()


def residual(case: GridCase, v, gen_q=None) -> np.ndarray:
    """Current mismatch (real, imag interleaved) at every non-slack bus.

    Generators inject their ``p_set`` and the reactive power in ``gen_q``
    (zero when omitted); the slack bus is excluded.
    """
    grid = CompiledGrid(validate_case(case))
    V = _as_voltages(grid, v)
    p_inj, q_inj = _fixed_injections(grid, gen_q)
    return _interleave(grid.mismatch(V, p_inj, q_inj))[_non_slack_rows(grid)]


def jacobian(case: GridCase, v, gen_q=None) -> sp.csr_matrix:
    """Analytic derivative of :func:`residual` w.r.t. non-slack (v_r, v_i)."""
    grid = CompiledGrid(validate_case(case))
    V = _as_voltages(grid, v)
    p_inj, q_inj = _fixed_injections(grid, gen_q)
    idx = _non_slack_rows(grid)
    return grid.mismatch_jacobian(V, p_inj, q_inj)[idx][:, idx].tocsr()


class _NewtonSystem:
    """Residual and Jacobian in the unknowns (non-slack voltages, PV-bus Q)."""

    def __init__(self, grid: CompiledGrid, V0, p_inj, q_fixed, pv, v_set):
        self.grid = grid
        self.V0 = V0.copy()
        self.p_inj = p_inj
        self.q_fixed = q_fixed
        self.pv = list(pv)
        self.v_set = v_set
        self.rows = _non_slack_rows(grid)
        self.n_v = self.rows.size
        self.pos = {k: r for r, k in enumerate(k for k in range(grid.n) if k != grid.slack)}

    def unpack(self, x):
        V = self.V0.copy()
        full = np.zeros(2 * self.grid.n)
        full[self.rows] = x[: self.n_v]
        keep = np.ones(self.grid.n, dtype=bool)
        keep[self.grid.slack] = False
        V[keep] = full[0::2][keep] + 1j * full[1::2][keep]
        q = self.q_fixed.copy()
        for j, k in enumerate(self.pv):
            q[k] = x[self.n_v + j]
        return V, q

    def pack(self, V, q):
        return np.concatenate([_interleave(V)[self.rows], [q[k] for k in self.pv]])

    def F(self, x):
        V, q = self.unpack(x)
        mis = _interleave(self.grid.mismatch(V, self.p_inj, q))[self.rows]
        vm2 = [abs(V[k]) ** 2 - self.v_set[k] ** 2 for k in self.pv]
        return np.concatenate([mis, vm2])

    def J(self, x):
        V, q = self.unpack(x)
        Jv = self.grid.mismatch_jacobian(V, self.p_inj, q)[self.rows][:, self.rows]
        n_pv = len(self.pv)
        if not n_pv:
            return Jv.tocsc()
        rows, cols, vals = [], [], []
        for j, k in enumerate(self.pv):
            r = self.pos[k]
            vr, vi = V[k].real, V[k].imag
            s = vr * vr + vi * vi
            rows += [2 * r, 2 * r + 1]
            cols += [j, j]
            vals += [-vi / s, vr / s]
        dq = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_v, n_pv))
        rows, cols, vals = [], [], []
        for j, k in enumerate(self.pv):
            r = self.pos[k]
            rows += [j, j]
            cols += [2 * r, 2 * r + 1]
            vals += [2.0 * V[k].real, 2.0 * V[k].imag]
        dv = sp.csr_matrix((vals, (rows, cols)), shape=(n_pv, self.n_v))
        return sp.bmat([[Jv, dq], [dv, None]], format="csc")


def _newton(system: _NewtonSystem, x, options: PFOptions):
    """Damped Newton: full step, halved while the 2-norm of F does not drop."""
    F = system.F(x)
    for it in range(1, options.max_iter + 1):
        dx = splu(system.J(x)).solve(-F)
        norm0 = np.linalg.norm(F)
        step = 1.0
        accepted = None
        for _ in range(options.max_halvings + 1):
            trial = x + step * dx
            try:
                F_trial = system.F(trial)
            except VoltageCollapse:
                F_trial = None
            if F_trial is not None and np.all(np.isfinite(F_trial)):
                accepted = (trial, F_trial)
                if np.linalg.norm(F_trial) < norm0 or norm0 == 0.0:
                    break
            step *= 0.5
        if accepted is None:
            V, _ = system.unpack(x + step * dx)
            raise VoltageCollapse(float(np.min(np.abs(V))))
        x, F = accepted
        if np.max(np.abs(F)) <= options.tol:
            return x, it, float(np.max(np.abs(F)))
    raise NonConvergence(options.max_iter, float(np.max(np.abs(F))))


def _split(total: float, lows, highs) -> np.ndarray:
    """Share ``total`` among units in proportion to their ranges."""
    lows, highs = np.asarray(lows, dtype=float), np.asarray(highs, dtype=float)
    rng = highs - lows
    if lows.size == 1:
        return np.array([total])
    if np.all(np.isfinite(rng)) and rng.sum() > 0.0:
        return lows + (total - lows.sum()) * rng / rng.sum()
    return np.full(lows.size, total / lows.size)


def solve_pf(case: GridCase, options: PFOptions = PFOptions()) -> PFSolution:
    """Solve the power flow with PV buses and reactive-limit switching."""
    grid = CompiledGrid(validate_case(case))
    gens = case.generators
    n = grid.n
    v_set = np.array([b.v_set for b in case.buses])
    V = np.full(n, complex(options.v_init))
    V[grid.slack] = v_set[grid.slack]

    p_inj = np.zeros(n)
    q_fixed = np.zeros(n)
    for gen in gens:
        k = grid.index[gen.bus]
        if k != grid.slack:
            p_inj[k] += gen.p_set
    q_lim = {}
    for k, members in grid.gens_at.items():
        q_lim[k] = (sum(gens[g].q_min for g in members), sum(gens[g].q_max for g in members))

    pv = [k for k, b in enumerate(case.buses) if b.kind == GENERATOR]
    at_limit: dict[int, str] = {}
    switches = {k: 0 for k in pv}
    q = q_fixed.copy()
    total_iter = 0
    while True:
        active_pv = [k for k in pv if k not in at_limit]
        system = _NewtonSystem(grid, V, p_inj, q, active_pv, v_set)
        x, iters, res = _newton(system, system.pack(V, q), options)
        total_iter += iters
        V, q = system.unpack(x)
        if not options.enforce_q_limits:
            break
        changed = False
        for k in pv:
            lo, hi = q_lim[k]
            if k not in at_limit and switches[k] < 2:
                if q[k] > hi + options.tol:
                    at_limit[k], q[k] = "q_max", hi
                elif q[k] < lo - options.tol:
                    at_limit[k], q[k] = "q_min", lo
                else:
                    continue
                switches[k] += 1
                changed = True
            elif k in at_limit and switches[k] < 2:
                vm = abs(V[k])
                # Back to PV when holding the setpoint needs less than the limit.
                if (at_limit[k] == "q_max" and vm > v_set[k]) or (at_limit[k] == "q_min" and vm < v_set[k]):
                    del at_limit[k]
                    switches[k] += 1
                    changed = True
        if not changed:
            break

    # Slack injection balances the network and local loads.
    I_slack = (grid.Y @ V)[grid.slack] + grid.load_currents(V)[grid.slack]
    S_slack = V[grid.slack] * np.conj(I_slack)

    gen_p = np.array([g.p_set for g in gens], dtype=float)
    gen_q = np.zeros(len(gens))
    for k, members in grid.gens_at.items():
        lows_q = [gens[g].q_min for g in members]
        highs_q = [gens[g].q_max for g in members]
        if k == grid.slack:
            gen_p[members] = _split(S_slack.real, [gens[g].p_min for g in members], [gens[g].p_max for g in members])
            gen_q[members] = _split(S_slack.imag, lows_q, highs_q)
        elif case.buses[k].kind == GENERATOR:
            gen_q[members] = _split(q[k], lows_q, highs_q)

    warnings = []
    low = [case.buses[k].id for k in range(n) if abs(V[k]) < LOW_VOLTAGE_FLAG]
    if low:
        warnings.append(f"low-voltage solution: |V| < {LOW_VOLTAGE_FLAG} p.u. at buses {low}")
        log.warning(warnings[-1])

    return PFSolution(
        bus_ids=grid.bus_ids,
        v=V,
        slack_injection=(float(S_slack.real), float(S_slack.imag)),
        gen_p=gen_p,
        gen_q=gen_q,
        iterations=total_iter,
        residual=res,
        warnings=warnings,
        at_q_limit={case.buses[k].id: lab for k, lab in at_limit.items()},
    )


def branch_losses(case: GridCase, V) -> complex:
    """Total complex power lost in series elements and line charging."""
    Y = build_admittance(case).Y
    V = np.asarray(V, dtype=complex)
    return complex(np.sum(V * np.conj(Y @ V)))


def load_power(case: GridCase, V) -> complex:
    index = case.bus_index()
    total = 0j
    for ld in case.loads:
        v = V[index[ld.bus]]
        p, q = ld.model.power(v.real, v.imag)
        total += complex(p, q)
    return total
