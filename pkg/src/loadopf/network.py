"""Static grid data model and nodal admittance assembly.

All quantities are per unit on a single, implicit system base.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    DanglingReference,
    Disconnected,
    DuplicateBusId,
    InvalidElement,
    NoSlack,
)
from .loads import LoadModel

SLACK = "slack"
GENERATOR = "generator"
LOAD = "load"
BUS_KINDS = (SLACK, GENERATOR, LOAD)

DEFAULT_V_MIN = 0.94
DEFAULT_V_MAX = 1.06


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX
    # Voltage magnitude setpoint used by power flow at slack and generator buses.
    v_set: float = 1.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_sh: float = 0.0

    @property
    def series_admittance(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost: tuple[float, float, float] = (0.0, 1.0, 0.0)
    # Real power dispatch used by power flow at non-slack buses.
    p_set: float = 0.0

    def cost_of(self, p: float) -> float:
        c2, c1, c0 = self.cost
        return c2 * p * p + c1 * p + c0


@dataclass(frozen=True)
class Load:
    bus: int
    model: LoadModel


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...] = ()
    loads: tuple[Load, ...] = ()

    def __post_init__(self):
        for name in ("buses", "branches", "generators", "loads"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def slack(self) -> Bus:
        return next(b for b in self.buses if b.kind == SLACK)

    def loads_at(self, bus_id: int) -> list[LoadModel]:
        return [ld.model for ld in self.loads if ld.bus == bus_id]

    @property
    def load_bus_ids(self) -> list[int]:
        seen = []
        for ld in self.loads:
            if ld.bus not in seen:
                seen.append(ld.bus)
        return seen

    def with_loads(self, loads) -> "GridCase":
        return GridCase(self.buses, self.branches, self.generators, tuple(loads))


@dataclass(frozen=True)
class AdmittanceMatrix:
    G: sp.csr_matrix
    B: sp.csr_matrix
    bus_ids: tuple[int, ...] = field(default=())

    @property
    def Y(self) -> sp.csr_matrix:
        return (self.G + 1j * self.B).tocsr()

    def toarray(self) -> np.ndarray:
        return self.Y.toarray()


def _finite(value, what):
    if not math.isfinite(value):
        raise InvalidElement(f"{what} must be finite, got {value}")


def validate_case(case: GridCase) -> GridCase:
    """Return ``case`` unchanged if every structural invariant holds.

    Raises the matching :class:`CaseValidationError` subclass otherwise.
    """
    ids = set()
    for bus in case.buses:
        if bus.id in ids:
            raise DuplicateBusId(bus.id)
        ids.add(bus.id)
        if bus.kind not in BUS_KINDS:
            raise InvalidElement(f"bus {bus.id}: unknown kind {bus.kind!r}")
        if not (0.0 < bus.v_min <= bus.v_max):
            raise InvalidElement(f"bus {bus.id}: need 0 < v_min <= v_max, got [{bus.v_min}, {bus.v_max}]")
        if not bus.v_set > 0.0:
            raise InvalidElement(f"bus {bus.id}: v_set must be positive")

    n_slack = sum(1 for b in case.buses if b.kind == SLACK)
    if n_slack != 1:
        raise NoSlack(n_slack)

    adjacency = defaultdict(set)
    for k, br in enumerate(case.branches):
        for end in (br.from_bus, br.to_bus):
            if end not in ids:
                raise DanglingReference(end, f"branch {k}")
        if br.from_bus == br.to_bus:
            raise InvalidElement(f"branch {k}: from and to bus are both {br.from_bus}")
        for value, name in ((br.r, "r"), (br.x, "x"), (br.b_sh, "b_sh")):
            _finite(value, f"branch {k} {name}")
        if br.r < 0.0:
            raise InvalidElement(f"branch {k}: negative resistance {br.r}")
        if br.r == 0.0 and br.x == 0.0:
            raise InvalidElement(f"branch {k}: zero impedance")
        adjacency[br.from_bus].add(br.to_bus)
        adjacency[br.to_bus].add(br.from_bus)

    gen_buses = set()
    for k, gen in enumerate(case.generators):
        if gen.bus not in ids:
            raise DanglingReference(gen.bus, f"generator {k}")
        if gen.p_min > gen.p_max or gen.q_min > gen.q_max:
            raise InvalidElement(f"generator {k}: inverted limits")
        if len(gen.cost) != 3 or gen.cost[0] < 0.0:
            raise InvalidElement(f"generator {k}: cost must be (c2, c1, c0) with c2 >= 0")
        gen_buses.add(gen.bus)
    for bus in case.buses:
        if bus.kind == GENERATOR and bus.id not in gen_buses:
            raise InvalidElement(f"generator bus {bus.id} has no generator")

    for k, ld in enumerate(case.loads):
        if ld.bus not in ids:
            raise DanglingReference(ld.bus, f"load {k}")
        if not adjacency[ld.bus]:
            raise InvalidElement(f"load bus {ld.bus} has no incident branch")

    # Breadth-first search from the slack bus.
    start = case.slack.id
    reached = {start}
    queue = deque([start])
    while queue:
        for nb in adjacency[queue.popleft()]:
            if nb not in reached:
                reached.add(nb)
                queue.append(nb)
    if reached != ids:
        raise Disconnected(ids - reached)
    return case


def build_admittance(case: GridCase) -> AdmittanceMatrix:
    """Assemble the nodal admittance matrix from pi-model branches."""
    index = case.bus_index()
    n = len(case.buses)
    rows, cols, vals = [], [], []
    for br in case.branches:
        i, j = index[br.from_bus], index[br.to_bus]
        y = br.series_admittance
        y_sh = 0.5j * br.b_sh
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [y + y_sh, y + y_sh, -y, -y]
    Y = sp.coo_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n)).tocsr()
    Y.sum_duplicates()
    return AdmittanceMatrix(G=Y.real.tocsr(), B=Y.imag.tocsr(), bus_ids=tuple(case.bus_ids))


def shunt_admittance(case: GridCase) -> np.ndarray:
    """Total shunt admittance at each bus (sum of half line charging)."""
    index = case.bus_index()
    out = np.zeros(len(case.buses), dtype=complex)
    for br in case.branches:
        out[index[br.from_bus]] += 0.5j * br.b_sh
        out[index[br.to_bus]] += 0.5j * br.b_sh
    return out
