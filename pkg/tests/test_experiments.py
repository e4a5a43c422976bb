import math

import numpy as np
import pytest

from conftest import two_bus_case
from loadopf.datasets import campus_base_case, three_bus_segmented, CAMPUS_SEGMENT_ONE
from loadopf.exceptions import CaseValidationError
from loadopf.experiments import (
    FREEZE_VOLTAGES,
    SegmentedCase,
    experiment_gap,
    experiment_sweep,
    frozen_case,
)
from loadopf.loads import BIGParams, PQParams, classify
from loadopf.network import Generator
from loadopf.opf import solve_opf
from loadopf.powerflow import solve_pf


@pytest.fixture(scope="module")
def campus_one():
    return SegmentedCase(campus_base_case(), {k: [CAMPUS_SEGMENT_ONE[k]] for k in ("pq", "zip", "big")})


def test_pq_rows_sit_above_admittance_rows():
    report = experiment_sweep(three_bus_segmented(), ["pq", "y"])
    assert len(report.rows) == 2 and not report.errors
    pq, y = report.row(1, "pq"), report.row(1, "y")
    for bus in (2, 3):
        assert pq.vm[bus] >= y.vm[bus]


def test_zero_load_segment_costs_nothing():
    base = two_bus_case(PQParams(0.0, 0.0))
    base = base.__class__(base.buses, base.branches, (Generator(1, -1.0, 5.0, -5.0, 5.0, (1.0, 1.0, 0.0)),), base.loads)
    report = experiment_sweep(SegmentedCase(base, {"pq": [{2: PQParams(0.0, 0.0)}]}), ["pq"])
    assert report.rows[0].ok
    assert report.rows[0].objective == pytest.approx(0.0, abs=1e-6)


def test_campus_segment_one_classification(campus_one):
    report = experiment_sweep(campus_one)
    assert len(report.rows) == 3 and not report.errors
    for kind in ("zip", "big"):
        for bus in (2, 3, 4):
            assert classify(CAMPUS_SEGMENT_ONE[kind][bus]).p_class == "impedance-type"
    for bus in (2, 3, 4):
        assert report.row(1, "pq").classification[bus].p_class == "power-type"


def test_classification_column_is_reproducible(campus_one):
    report = experiment_sweep(campus_one)
    for row in report.rows:
        for bus, rep in row.classification.items():
            model = campus_one.families[row.kind][0][bus]
            assert classify(model, row.voltages[bus]) == rep


def test_infeasible_cell_is_recorded():
    sc = three_bus_segmented()
    sc.families["pq"].append({2: PQParams(30.0, 10.0), 3: PQParams(30.0, 10.0)})
    sc.families["y"].append(sc.families["y"][0])
    report = experiment_sweep(sc, ["pq", "y"])
    assert len(report.rows) == 4
    bad = report.row(2, "pq")
    assert not bad.ok and math.isnan(bad.objective)
    assert report.row(2, "y").ok
    assert [(r.segment, r.kind) for r in report.rows] == [(1, "pq"), (1, "y"), (2, "pq"), (2, "y")]


@pytest.mark.parametrize("kind", ["pq", "zip", "big"])
def test_identical_kinds_have_no_gap(campus_one, kind):
    report = experiment_gap(campus_one, kind, kind)
    assert not report.errors
    assert abs(report.rows[0].delta) <= 10 * 1e-6


def test_pq_to_admittance_needs_more_power():
    report = experiment_gap(three_bus_segmented(), "pq", "y")
    assert report.rows[0].ok and report.rows[0].delta > 0


def test_b_power_flow_cannot_beat_b_optimum(campus_one):
    case_b = campus_one.case_for("zip", 0)
    sol_a = solve_opf(campus_one.case_for("pq", 0))
    pf = solve_pf(frozen_case(case_b, sol_a))
    vm = np.abs(pf.v)
    feasible = all(b.v_min <= vm[k] <= b.v_max for k, b in enumerate(case_b.buses)) and all(
        g.p_min <= p <= g.p_max and g.q_min <= q <= g.q_max for g, p, q in zip(case_b.generators, pf.gen_p, pf.gen_q)
    )
    assert feasible
    cost = sum(g.cost_of(p) for g, p in zip(case_b.generators, pf.gen_p))
    assert cost >= solve_opf(case_b).objective - 1e-6


def test_frozen_case_sets_setpoints(campus_one):
    sol = solve_opf(campus_one.case_for("pq", 0))
    frozen = frozen_case(campus_one.case_for("zip", 0), sol)
    assert frozen.buses[0].v_set == pytest.approx(sol.x.vm[0])
    assert frozen.buses[4].v_set == pytest.approx(sol.x.vm[4])
    assert frozen.generators[1].p_set == pytest.approx(sol.x.p_g[1])
    loose = frozen_case(campus_one.case_for("zip", 0), sol, FREEZE_VOLTAGES)
    assert loose.generators[1].p_set == campus_one.base.generators[1].p_set
    with pytest.raises(ValueError):
        frozen_case(campus_one.case_for("zip", 0), sol, "nothing")


def test_voltages_only_freeze_runs(campus_one):
    report = experiment_gap(campus_one, "pq", "zip", freeze=FREEZE_VOLTAGES)
    assert report.rows[0].ok and report.freeze == FREEZE_VOLTAGES


def test_segmented_validation():
    base = three_bus_segmented().base
    with pytest.raises(CaseValidationError, match="segment 1 missing load bus 3"):
        SegmentedCase(base, {"pq": [{2: PQParams(1, 0)}]})
    with pytest.raises(CaseValidationError, match="family"):
        SegmentedCase(base, {"pq": [{2: PQParams(1, 0), 3: BIGParams(1, 0, 0, 0)}]})
    with pytest.raises(CaseValidationError, match="unknown bus"):
        SegmentedCase(base, {"pq": [{2: PQParams(1, 0), 3: PQParams(1, 0), 9: PQParams(1, 0)}]})
    with pytest.raises(CaseValidationError, match="segment counts"):
        full = {2: PQParams(1, 0), 3: PQParams(1, 0)}
        SegmentedCase(base, {"pq": [full], "zip": []})
    with pytest.raises(KeyError):
        experiment_sweep(three_bus_segmented(), ["big"])
