"""Case JSON, measurement CSV and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import GridError, ParseError
from .fitting import MeasurementSeries
from .loads import PARAM_KEYS, model_from_params, model_to_params
from .network import (
    DEFAULT_V_MAX,
    DEFAULT_V_MIN,
    Branch,
    Bus,
    Generator,
    GridCase,
    Load,
    validate_case,
)

MEASUREMENT_HEADER = ["t", "v_r", "v_i", "i_r", "i_i"]


def _get(obj: dict, key: str, where: str):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise ParseError(f"{where}: missing key {key!r}") from None


def _num(obj: dict, key: str, where: str, default=None) -> float:
    if default is not None and key not in obj:
        return float(default)
    value = _get(obj, key, where)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: key {key!r} is not a number ({value!r})") from None


def load_model_from_dict(entry: dict, where: str):
    kind = _get(entry, "model", where)
    if kind not in PARAM_KEYS:
        raise ParseError(f"{where}: unknown model {kind!r}")
    params = _get(entry, "params", where)
    try:
        return model_from_params(kind, params)
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def case_from_dict(doc: dict) -> GridCase:
    for key in ("buses", "branches", "generators", "loads"):
        if key not in doc:
            raise ParseError(f"case: missing key {key!r}")
    buses = []
    for k, b in enumerate(doc["buses"]):
        where = f"buses[{k}]"
        buses.append(
            Bus(
                id=int(_get(b, "id", where)),
                kind=str(_get(b, "kind", where)),
                v_min=_num(b, "v_min", where, DEFAULT_V_MIN),
                v_max=_num(b, "v_max", where, DEFAULT_V_MAX),
                v_set=_num(b, "v_set", where, 1.0),
            )
        )
    branches = []
    for k, br in enumerate(doc["branches"]):
        where = f"branches[{k}]"
        branches.append(
            Branch(
                from_bus=int(_get(br, "from", where)),
                to_bus=int(_get(br, "to", where)),
                r=_num(br, "r", where),
                x=_num(br, "x", where),
                b_sh=_num(br, "b_sh", where, 0.0),
            )
        )
    generators = []
    for k, g in enumerate(doc["generators"]):
        where = f"generators[{k}]"
        cost = g.get("cost", [0.0, 1.0, 0.0])
        if len(cost) != 3:
            raise ParseError(f"{where}: cost must be [c2, c1, c0]")
        generators.append(
            Generator(
                bus=int(_get(g, "bus", where)),
                p_min=_num(g, "p_min", where),
                p_max=_num(g, "p_max", where),
                q_min=_num(g, "q_min", where),
                q_max=_num(g, "q_max", where),
                cost=tuple(float(c) for c in cost),
                p_set=_num(g, "p_set", where, 0.0),
            )
        )
    loads = []
    for k, ld in enumerate(doc["loads"]):
        where = f"loads[{k}]"
        loads.append(Load(int(_get(ld, "bus", where)), load_model_from_dict(ld, where)))
    return validate_case(GridCase(tuple(buses), tuple(branches), tuple(generators), tuple(loads)))


def case_to_dict(case: GridCase) -> dict:
    return {
        "buses": [
            {"id": b.id, "kind": b.kind, "v_min": b.v_min, "v_max": b.v_max, "v_set": b.v_set} for b in case.buses
        ],
        "branches": [
            {"from": br.from_bus, "to": br.to_bus, "r": br.r, "x": br.x, "b_sh": br.b_sh} for br in case.branches
        ],
        "generators": [
            {
                "bus": g.bus,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "q_min": g.q_min,
                "q_max": g.q_max,
                "cost": list(g.cost),
                "p_set": g.p_set,
            }
            for g in case.generators
        ],
        "loads": [load_to_dict(ld.bus, ld.model) for ld in case.loads],
    }


def load_to_dict(bus, model) -> dict:
    return {"bus": bus, "model": model.kind, "params": model_to_params(model)}


def _read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def load_case(path) -> GridCase:
    return case_from_dict(_read_json(path))


def save_case(case: GridCase, path) -> None:
    Path(path).write_text(dump_json(case_to_dict(case)))


def load_measurements(path, bus: int | None = None) -> MeasurementSeries:
    """Read a ``t,v_r,v_i,i_r,i_i`` CSV; the bus id defaults to digits in the file name."""
    path = Path(path)
    if bus is None:
        digits = "".join(ch for ch in path.stem if ch.isdigit())
        bus = int(digits) if digits else 0
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != MEASUREMENT_HEADER:
            bad = [h for h in header if h not in MEASUREMENT_HEADER]
            detail = f"unexpected column {bad[0]!r}" if bad else f"columns {header}"
            raise ParseError(f"{path}: line 1: {detail}; expected header {','.join(MEASUREMENT_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise ParseError(f"{path}: line {lineno}: expected 5 fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-numeric field") from None
    if not rows:
        raise ParseError(f"{path}: no samples")
    a = np.array(rows)
    try:
        return MeasurementSeries(bus, a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4])
    except (ValueError, GridError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def measurements_to_csv(series: MeasurementSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MEASUREMENT_HEADER)
    for t, v, i in zip(series.t, series.v, series.i):
        w.writerow([repr(float(x)) for x in (t, v.real, v.imag, i.real, i.imag)])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def emit_report(report, fmt: str = "json") -> bytes:
    """Serialize any report exposing ``as_dict()`` and ``table()``.

    ``table()`` returns ``(header, rows)``; CSV output is one line per row.
    """
    if fmt == "json":
        return dump_json(report.as_dict()).encode()
    if fmt == "csv":
        header, rows = report.table()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else _csv_cell(v) for v in row])
        return buf.getvalue().encode()
    raise ValueError(f"unknown report format {fmt!r}; expected json or csv")


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def segmented_from_dict(doc: dict, base_dir: Path | None = None):
    """Build a SegmentedCase from ``{"case": ..., "families": {kind: [segment, ...]}}``.

    ``case`` is an inline case object or a path relative to ``base_dir``;
    each segment maps a bus id to ``{"model", "params"}``.
    """
    from .experiments import SegmentedCase

    case_doc = _get(doc, "case", "segmented")
    if isinstance(case_doc, str):
        base = load_case((base_dir or Path(".")) / case_doc)
    else:
        base = case_from_dict(case_doc)
    families_doc = _get(doc, "families", "segmented")
    if not isinstance(families_doc, dict) or not families_doc:
        raise ParseError("segmented: 'families' must be a non-empty object keyed by model kind")
    families = {}
    for kind, segs in families_doc.items():
        if not isinstance(segs, list):
            raise ParseError(f"families.{kind}: expected an array of segments")
        family = []
        for s, seg in enumerate(segs, start=1):
            models = {}
            for bus, entry in seg.items():
                try:
                    bus_id = int(bus)
                except ValueError:
                    raise ParseError(f"families.{kind}[{s}]: bus key {bus!r} is not an integer") from None
                models[bus_id] = load_model_from_dict(entry, f"families.{kind}[{s}].{bus}")
            family.append(models)
        families[kind] = family
    return SegmentedCase(base, families)


def segmented_to_dict(seg_case) -> dict:
    return {
        "case": case_to_dict(seg_case.base),
        "families": {
            kind: [
                {str(bus): {"model": m.kind, "params": model_to_params(m)} for bus, m in sorted(seg.items())}
                for seg in segs
            ]
            for kind, segs in seg_case.families.items()
        },
    }


def load_segmented(path):
    path = Path(path)
    return segmented_from_dict(_read_json(path), path.parent)


def save_segmented(seg_case, path) -> None:
    Path(path).write_text(dump_json(segmented_to_dict(seg_case)))
