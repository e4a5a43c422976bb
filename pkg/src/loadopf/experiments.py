"""Per-segment OPF sweeps and the cross-model dispatch gap study."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .exceptions import CaseValidationError, GridError
from .loads import ClassificationReport, LoadModel, classify
from .network import GENERATOR, LOAD, SLACK, GridCase, Load
from .opf import OPFOptions, solve_opf
from .powerflow import PFOptions, solve_pf

FREEZE_ALL = "all"
FREEZE_VOLTAGES = "voltages-only"
OK = "ok"


@dataclass
class SegmentedCase:
    """A base network plus per-segment load sets for each model kind.

    ``families[kind][s]`` maps load bus id to that segment's model.
    """

    base: GridCase
    families: dict[str, list[dict[int, LoadModel]]]

    def __post_init__(self):
        self.families = {kind: [dict(seg) for seg in segs] for kind, segs in self.families.items()}
        buses = self.load_buses
        known = set(self.base.bus_ids)
        counts = {len(segs) for segs in self.families.values()}
        if len(counts) > 1:
            raise CaseValidationError(f"families have different segment counts: {sorted(counts)}")
        for kind, segs in self.families.items():
            for s, seg in enumerate(segs, start=1):
                for bus in buses:
                    if bus not in seg:
                        raise CaseValidationError(f"segment {s} missing load bus {bus}")
                for bus, model in seg.items():
                    if bus not in known:
                        raise CaseValidationError(f"segment {s} references unknown bus {bus}")
                    if model.kind != kind:
                        raise CaseValidationError(
                            f"segment {s} bus {bus}: {model.kind} model in the {kind!r} family"
                        )

    @property
    def load_buses(self) -> list[int]:
        if self.base.loads:
            return self.base.load_bus_ids
        return [b.id for b in self.base.buses if b.kind == LOAD]

    @property
    def kinds(self) -> list[str]:
        return list(self.families)

    @property
    def n_segments(self) -> int:
        return len(next(iter(self.families.values()), []))

    def case_for(self, kind: str, segment: int) -> GridCase:
        """The base network carrying segment ``segment`` (0-based) of ``kind``."""
        try:
            seg = self.families[kind][segment]
        except KeyError:
            raise KeyError(f"no {kind!r} family in the segmented case") from None
        return self.base.with_loads(Load(bus, model) for bus, model in seg.items())


@dataclass
class SweepRow:
    segment: int
    kind: str
    status: str
    objective: float = math.nan
    vm: dict[int, float] = field(default_factory=dict)
    voltages: dict[int, tuple[float, float]] = field(default_factory=dict)
    bound_activity: dict[int, str] = field(default_factory=dict)
    classification: dict[int, ClassificationReport] = field(default_factory=dict)
    p_g: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass
class SweepReport:
    bus_ids: list[int]
    load_buses: list[int]
    rows: list[SweepRow] = field(default_factory=list)

    @property
    def errors(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.ok]

    def row(self, segment: int, kind: str) -> SweepRow:
        return next(r for r in self.rows if r.segment == segment and r.kind == kind)

    def as_dict(self) -> dict:
        return {
            "rows": [
                {
                    "segment": r.segment,
                    "kind": r.kind,
                    "status": r.status,
                    "objective": r.objective,
                    "vm": r.vm,
                    "voltages": {b: list(v) for b, v in r.voltages.items()},
                    "bound_activity": r.bound_activity,
                    "classification": {b: c.as_dict() for b, c in r.classification.items()},
                    "p_g": r.p_g,
                }
                for r in self.rows
            ]
        }

    def table(self):
        """One row per (segment, kind); per-bus columns follow bus order."""
        header = ["segment", "kind", "objective", "status"]
        header += [f"vm_{b}" for b in self.bus_ids]
        header += [f"bound_{b}" for b in self.bus_ids]
        header += [f"class_{b}" for b in self.load_buses]
        header += [f"margin_{b}" for b in self.load_buses]
        rows = []
        for r in self.rows:
            row = [r.segment, r.kind, r.objective if r.ok else None, r.status]
            row += [r.vm.get(b) for b in self.bus_ids]
            row += [r.bound_activity.get(b) for b in self.bus_ids]
            row += [r.classification[b].p_class if b in r.classification else None for b in self.load_buses]
            row += [max(r.classification[b].p_margins) if b in r.classification else None for b in self.load_buses]
            rows.append(row)
        return header, rows


def _error_status(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _classify_at(case: GridCase, voltages: dict[int, tuple[float, float]]) -> dict[int, ClassificationReport]:
    out = {}
    for ld in case.loads:
        out[ld.bus] = classify(ld.model, voltages[ld.bus])
    return out


def experiment_sweep(seg_case: SegmentedCase, kinds=None, opf_options: OPFOptions = OPFOptions()) -> SweepReport:
    """Solve one OPF per (segment, kind); failed cells are recorded, not raised."""
    kinds = list(kinds) if kinds is not None else seg_case.kinds
    for kind in kinds:
        if kind not in seg_case.families:
            raise KeyError(f"no {kind!r} family in the segmented case")
    report = SweepReport(seg_case.base.bus_ids, seg_case.load_buses)
    for s in range(seg_case.n_segments):
        for kind in kinds:
            case = seg_case.case_for(kind, s)
            row = SweepRow(segment=s + 1, kind=kind, status=OK)
            try:
                sol = solve_opf(case, opf_options)
            except GridError as exc:
                row.status = _error_status(exc)
                report.rows.append(row)
                continue
            row.objective = sol.objective
            for k, b in enumerate(sol.x.bus_ids):
                row.vm[b] = float(sol.x.vm[k])
                row.voltages[b] = (float(sol.x.v_r[k]), float(sol.x.v_i[k]))
            row.bound_activity = dict(sol.bound_activity["vm"])
            row.classification = _classify_at(case, row.voltages)
            row.p_g = [float(p) for p in sol.x.p_g]
            report.rows.append(row)
    return report


@dataclass
class GapRow:
    segment: int
    status: str
    objective_a: float = math.nan
    generation_a: float = math.nan
    generation_b: float = math.nan
    delta: float = math.nan
    opf_converged: bool = False
    pf_converged: bool = False

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass
class GapReport:
    kind_a: str
    kind_b: str
    freeze: str = FREEZE_ALL
    rows: list[GapRow] = field(default_factory=list)

    @property
    def errors(self) -> list[GapRow]:
        return [r for r in self.rows if not r.ok]

    def as_dict(self) -> dict:
        return {
            "from": self.kind_a,
            "to": self.kind_b,
            "freeze": self.freeze,
            "rows": [
                {
                    "segment": r.segment,
                    "status": r.status,
                    "objective_a": r.objective_a,
                    "generation_a": r.generation_a,
                    "generation_b": r.generation_b,
                    "delta": r.delta,
                    "opf_converged": r.opf_converged,
                    "pf_converged": r.pf_converged,
                }
                for r in self.rows
            ],
        }

    def table(self):
        header = ["segment", "objective_a", "generation_a", "generation_b", "delta", "status"]
        rows = [[r.segment, r.objective_a, r.generation_a, r.generation_b, r.delta, r.status] for r in self.rows]
        return header, rows


def frozen_case(case_b: GridCase, opf_a, freeze: str = FREEZE_ALL) -> GridCase:
    """Impose A's OPF setpoints on the network carrying B's loads.

    Generator buses hold A's voltage magnitude.  With ``freeze="all"`` every
    non-slack generator also keeps A's real power; ``"voltages-only"``
    leaves the case's own ``p_set``.
    """
    if freeze not in (FREEZE_ALL, FREEZE_VOLTAGES):
        raise ValueError(f"freeze must be {FREEZE_ALL!r} or {FREEZE_VOLTAGES!r}")
    vm = dict(zip(opf_a.x.bus_ids, opf_a.x.vm))
    gen_buses = {g.bus for g in case_b.generators}
    buses = []
    for b in case_b.buses:
        if b.id in gen_buses:
            # Any bus with a dispatched unit holds its voltage in the PF.
            kind = b.kind if b.kind == SLACK else GENERATOR
            buses.append(replace(b, kind=kind, v_set=float(vm[b.id])))
        else:
            buses.append(b)
    gens = list(case_b.generators)
    if freeze == FREEZE_ALL:
        gens = [replace(g, p_set=float(p)) for g, p in zip(gens, opf_a.x.p_g)]
    return GridCase(tuple(buses), case_b.branches, tuple(gens), case_b.loads)


def experiment_gap(
    seg_case: SegmentedCase,
    kind_a: str,
    kind_b: str,
    opf_options: OPFOptions = OPFOptions(),
    pf_options: PFOptions = PFOptions(),
    freeze: str = FREEZE_ALL,
) -> GapReport:
    """Extra generation needed when dispatch planned with A meets B loads.

    The slack absorbs the whole mismatch; ``delta`` is total B power-flow
    generation minus total A-OPF generation.
    """
    for kind in (kind_a, kind_b):
        if kind not in seg_case.families:
            raise KeyError(f"no {kind!r} family in the segmented case")
    report = GapReport(kind_a, kind_b, freeze)
    for s in range(seg_case.n_segments):
        row = GapRow(segment=s + 1, status=OK)
        report.rows.append(row)
        try:
            sol_a = solve_opf(seg_case.case_for(kind_a, s), opf_options)
        except GridError as exc:
            row.status = "opf " + _error_status(exc)
            continue
        row.opf_converged = True
        row.objective_a = sol_a.objective
        row.generation_a = sol_a.total_generation
        try:
            pf = solve_pf(frozen_case(seg_case.case_for(kind_b, s), sol_a, freeze), pf_options)
        except GridError as exc:
            row.status = "pf " + _error_status(exc)
            continue
        row.pf_converged = True
        row.generation_b = pf.total_generation
        row.delta = row.generation_b - row.generation_a
    return report
