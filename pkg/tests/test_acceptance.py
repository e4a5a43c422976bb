"""Acceptance criteria, one test each.

Every test prints a single ``[criterion N] PASS|FAIL`` line with its
runtime.  Run directly (``python3 tests/test_acceptance.py``) for just the
summary lines.
"""

import sys
from dataclasses import fields
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_case, random_model, two_bus_case  # noqa: E402
from oracles import brute_force_opf, exhaustive_segmentation  # noqa: E402
from loadopf.datasets import (  # noqa: E402
    CAMPUS_SEGMENT_ONE,
    load_bundled_segmented,
    load_bundled_series,
    three_bus_case,
)
from loadopf.experiments import experiment_gap, experiment_sweep  # noqa: E402
from loadopf.fitting import MeasurementSeries, fit_big, fit_pq, fit_zip, model_currents, segment_fit  # noqa: E402
from loadopf.loads import IMPEDANCE_TYPE, OperatingVoltage, PQParams, YParams, classify, evaluate  # noqa: E402
from loadopf.opf import LOWER, UPPER, solve_opf  # noqa: E402
from loadopf.powerflow import PFOptions, jacobian, residual, solve_pf  # noqa: E402

# Pinned tolerances and budgets.
MARGIN_TOL = 1e-9
KKT_TOL = 1e-6
GRID_STEP = 1e-3
OBJ_TOL = 1e-3
FD_STEP = 1e-6
FD_RTOL = 1e-5
FD_ATOL = 1e-6
LINEAR_TOL = 1e-10
RECOVERY_TOL = 1e-9
SSE_RTOL = 1e-7
SSE_ATOL = 1e-9
RMS_LIMIT = 0.04
SAME_KIND_GAP = 1e-5
COST_TOL = 1e-6


_terminal = None


@pytest.fixture(autouse=True)
def _summary_writer(request):
    # The terminal reporter prints past output capture.
    global _terminal
    _terminal = request.config.pluginmanager.get_plugin("terminalreporter")


def report(n, title, ok, detail, elapsed, budget=None):
    within = budget is None or elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    timing = f"{elapsed:.2f}s" + (f" (budget {budget:g}s)" if budget else "")
    line = f"[criterion {n}] {status} {title}: {detail}; {timing}"
    if _terminal is not None:
        _terminal.write_line(line)
    else:
        print(line)
    assert ok, line
    assert within, line


def field_names(obj):
    return [f.name for f in fields(obj)]


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_classification_fidelity():
    expected = {
        ("zip", 2): (0.14994,),
        ("zip", 3): (1.55844,),
        ("zip", 4): (0.79074,),
        ("big", 2): (1.37006, 0.031136),
        ("big", 3): (1.97228, 0.044819),
        ("big", 4): (1.5169, -0.13531),
    }
    with Timer() as t:
        got = {key: classify(CAMPUS_SEGMENT_ONE[key[0]][key[1]]) for key in expected}
    ok = all(r.p_class == IMPEDANCE_TYPE for r in got.values())
    err = max(max(abs(a - b) for a, b in zip(got[k].p_margins, expected[k])) for k in expected)
    ok = ok and err <= MARGIN_TOL
    report(1, "classification fidelity", ok, f"6/6 impedance-type in P, max margin error {err:.1e}", t.elapsed, 1.0)


def test_criterion_2_pq_vs_admittance_contrast():
    with Timer() as t:
        pq = solve_opf(three_bus_case("pq"))
        y = solve_opf(three_bus_case("y"))
    load_idx = [k for k, b in enumerate(three_bus_case("pq").buses) if b.kind == "load"]
    higher = all(pq.x.vm[k] > y.x.vm[k] for k in load_idx)
    act_pq = {a for a in pq.bound_activity["vm"].values() if a != "interior"}
    act_y = {a for a in y.bound_activity["vm"].values() if a != "interior"}
    ok = higher and act_pq == {UPPER} and act_y == {LOWER} and max(pq.kkt_residual, y.kkt_residual) <= KKT_TOL
    detail = (
        f"load |V| pq={np.round(pq.x.vm[load_idx], 4).tolist()} y={np.round(y.x.vm[load_idx], 4).tolist()}, "
        f"active pq={sorted(act_pq)} y={sorted(act_y)}"
    )
    report(2, "PQ vs Y operating point", ok, detail, t.elapsed, 5.0)


def test_criterion_3_opf_matches_brute_force():
    models = {"pq": PQParams(1.0, 0.3), "y": YParams(1.0, -0.3), "big": CAMPUS_SEGMENT_ONE["big"][4]}
    errs = {}
    with Timer() as t:
        for kind, model in models.items():
            case = two_bus_case(model)
            best, _ = brute_force_opf(case, GRID_STEP)
            errs[kind] = abs(solve_opf(case).objective - best)
    ok = max(errs.values()) <= OBJ_TOL
    detail = ", ".join(f"{k} |diff|={v:.1e}" for k, v in errs.items())
    report(3, "OPF vs brute-force grid", ok, detail, t.elapsed, 10.0)


def _fd_power_gradient(model, v):
    out = []
    for dr, di in ((FD_STEP, 0.0), (0.0, FD_STEP)):
        up = evaluate(model, OperatingVoltage(v.v_r + dr, v.v_i + di))
        dn = evaluate(model, OperatingVoltage(v.v_r - dr, v.v_i - di))
        out.append(((up.p - dn.p) / (2 * FD_STEP), (up.q - dn.q) / (2 * FD_STEP)))
    return np.array(out).T


def _fd_jacobian(case, v):
    cols = []
    for k in range(1, v.size):
        for d in (FD_STEP, 1j * FD_STEP):
            up, dn = v.copy(), v.copy()
            up[k] += d
            dn[k] -= d
            cols.append((residual(case, up) - residual(case, dn)) / (2 * FD_STEP))
    return np.column_stack(cols)


def test_criterion_4_gradients_and_jacobians():
    rng = np.random.default_rng(2024)
    bad = 0
    with Timer() as t:
        for _ in range(200):
            model = random_model(rng)
            m, a = rng.uniform(0.5, 1.5), rng.uniform(-np.pi, np.pi)
            v = OperatingVoltage(m * np.cos(a), m * np.sin(a))
            e = evaluate(model, v)
            if not np.allclose([e.d_p, e.d_q], _fd_power_gradient(model, v), rtol=FD_RTOL, atol=FD_ATOL):
                bad += 1
        for k in range(5):
            n = 3 + k % 4
            case = random_case(rng, n)
            v = rng.uniform(0.85, 1.1, n) * np.exp(1j * rng.uniform(-0.2, 0.2, n))
            if not np.allclose(jacobian(case, v).toarray(), _fd_jacobian(case, v), rtol=FD_RTOL, atol=FD_ATOL):
                bad += 1
    report(4, "gradient/Jacobian suite", bad == 0, f"{bad} mismatches over 200 draws + 5 networks", t.elapsed, 30.0)


def test_criterion_5_affine_networks_one_iteration():
    rng = np.random.default_rng(5)
    iters = []
    with Timer() as t:
        for k in range(6):
            case = random_case(rng, 3 + k % 4, kinds=("big", "y"), with_pv=False)
            for v_init in (1.0, 0.2, 3.0):
                sol = solve_pf(case, PFOptions(v_init=v_init, tol=LINEAR_TOL))
                iters.append(sol.iterations if sol.residual <= LINEAR_TOL else -1)
    ok = set(iters) == {1}
    report(5, "BIG/Y linearity", ok, f"iteration counts {sorted(set(iters))} over {len(iters)} solves", t.elapsed)


def test_criterion_6_fitting_recovery_and_segmentation():
    rng = np.random.default_rng(6)
    worst = 0.0
    mismatches = 0
    checked = 0
    with Timer() as t:
        v = rng.uniform(0.9, 1.1, 12) * np.exp(1j * rng.uniform(-0.1, 0.1, 12))
        for kind, fit in (("pq", fit_pq), ("zip", fit_zip), ("big", fit_big)):
            for _ in range(20):
                model = random_model(rng, kind)
                s = MeasurementSeries(1, np.arange(12.0), v, model_currents(model, v))
                got = fit(s)
                worst = max(worst, max(abs(getattr(got, f) - getattr(model, f)) for f in field_names(model)))
        for kind, min_len in (("pq", 1), ("zip", 3), ("big", 2)):
            for n in range(1, 13):
                for k in (1, 2, 3):
                    if k * min_len > n:
                        continue
                    vv = rng.uniform(0.9, 1.1, n) * np.exp(1j * rng.uniform(-0.1, 0.1, n))
                    ii = model_currents(random_model(rng, "big"), vv) * rng.uniform(0.5, 1.5, n)
                    seg, fr = segment_fit(MeasurementSeries(1, np.arange(float(n)), vv, ii), k, kind, min_len)
                    best, cuts = exhaustive_segmentation(kind, vv, ii, k, min_len)
                    checked += 1
                    same = abs(fr.total_sse - best) <= SSE_ATOL + SSE_RTOL * best and seg.boundaries == cuts
                    mismatches += not same
    ok = worst <= RECOVERY_TOL and mismatches == 0
    detail = f"max parameter error {worst:.1e}, {mismatches}/{checked} segmentations differ from enumeration"
    report(6, "fitting recovery", ok, detail, t.elapsed, 30.0)


def test_criterion_7_rms_plausibility():
    series = load_bundled_series()
    with Timer() as t:
        rms = {
            kind: max(segment_fit(s, 12, kind)[1].total_rms for s in series.values()) for kind in ("pq", "zip", "big")
        }
    ok = all(r <= RMS_LIMIT for r in rms.values())
    detail = "worst bus average RMS " + ", ".join(f"{k}={v:.4f}" for k, v in rms.items())
    report(7, "RMS plausibility (k=6 per day)", ok, detail, t.elapsed)


@pytest.fixture(scope="module")
def campus():
    return load_bundled_segmented()


def test_criterion_8_gap_sign(campus):
    with Timer() as t:
        gap = experiment_gap(campus, "pq", "zip")
        same = {k: experiment_gap(campus, k, k) for k in ("pq", "zip", "big")}
    converged = [r for r in gap.rows if r.pf_converged]
    positive = all(r.delta > 0 for r in converged)
    worst_same = max(abs(r.delta) for rep in same.values() for r in rep.rows if r.ok)
    same_ok = all(not rep.errors for rep in same.values()) and worst_same <= SAME_KIND_GAP
    detail = (
        f"pq->zip delta>0 in {sum(r.delta > 0 for r in converged)}/{len(converged)} converged segments "
        f"(min {min(r.delta for r in converged):.4f}), max |same-kind delta| {worst_same:.1e}"
    )
    report(8, "gap experiment sign", bool(converged) and positive and same_ok, detail, t.elapsed)


def test_criterion_9_cost_ordering(campus):
    impedance = all(
        classify(m).p_class == IMPEDANCE_TYPE for k in ("zip", "big") for seg in campus.families[k] for m in seg.values()
    )
    with Timer() as t:
        sweep = experiment_sweep(campus, ["pq", "zip", "big"])
    ordered = 0
    for s in range(1, campus.n_segments + 1):
        pq, z, b = (sweep.row(s, k) for k in ("pq", "zip", "big"))
        ordered += pq.ok and z.ok and b.ok and pq.objective >= z.objective - COST_TOL and pq.objective >= b.objective - COST_TOL
    ok = impedance and ordered == campus.n_segments
    detail = f"fitted ZIP/BIG impedance-type: {impedance}; PQ costliest in {ordered}/{campus.n_segments} segments"
    report(9, "cost ordering", ok, detail, t.elapsed)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
