"""Independent reference computations used by the tests."""

import itertools
from dataclasses import replace

import numpy as np

from loadopf.exceptions import GridError
from loadopf.powerflow import PFOptions, solve_pf


def brute_force_opf(case, step=1e-3):
    """Scan the slack voltage magnitude on a grid; single-generator cases only.

    Each grid point is a power flow; points violating any bus band or the
    generator box are discarded.  Returns ``(objective, v_slack)``.
    """
    assert len(case.generators) == 1
    slack = case.slack
    gen = case.generators[0]
    n = int(round((slack.v_max - slack.v_min) / step))
    best = (np.inf, None)
    for v_set in np.linspace(slack.v_min, slack.v_max, n + 1):
        buses = tuple(replace(b, v_set=float(v_set)) if b.kind == "slack" else b for b in case.buses)
        try:
            sol = solve_pf(replace(case, buses=buses), PFOptions(enforce_q_limits=False))
        except GridError:
            continue
        vm = np.abs(sol.v)
        if any(vm[k] < b.v_min - 1e-12 or vm[k] > b.v_max + 1e-12 for k, b in enumerate(case.buses)):
            continue
        p, q = sol.slack_injection
        if not (gen.p_min <= p <= gen.p_max and gen.q_min <= q <= gen.q_max):
            continue
        cost = gen.cost_of(p)
        if cost < best[0]:
            best = (cost, float(v_set))
    return best


def segment_sse(kind, v, i):
    """Current-domain SSE of one segment fit, computed from scratch.

    PQ and ZIP powers are fit per component (mean, or quadratic in |V|);
    BIG is an affine least-squares fit of the current phasor.
    """
    if kind == "big":
        X = np.column_stack([np.ones_like(v), v])
        coef, *_ = np.linalg.lstsq(X, i, rcond=None)
        return float(np.sum(np.abs(i - X @ coef) ** 2))
    s = v * np.conj(i)
    m = np.abs(v)
    if kind == "pq":
        p_hat = np.full(v.size, s.real.mean())
        q_hat = np.full(v.size, s.imag.mean())
    else:
        V = np.vander(m, 3)
        p_hat = V @ np.linalg.lstsq(V, s.real, rcond=None)[0]
        q_hat = V @ np.linalg.lstsq(V, s.imag, rcond=None)[0]
    i_hat = np.conj((p_hat + 1j * q_hat) / v)
    return float(np.sum(np.abs(i - i_hat) ** 2))


def exhaustive_segmentation(kind, v, i, k, min_len):
    """All K-segmentations of a short series; returns (best_sse, boundaries).

    Ties keep the lexicographically smallest boundary tuple.
    """
    n = v.size
    best = (np.inf, None)
    for cuts in itertools.combinations(range(min_len, n - min_len + 1), k - 1):
        edges = (0, *cuts, n)
        if any(b - a < min_len for a, b in zip(edges[:-1], edges[1:])):
            continue
        total = sum(segment_sse(kind, v[a:b], i[a:b]) for a, b in zip(edges[:-1], edges[1:]))
        if best[1] is None or total < best[0] - 1e-9 * (1 + abs(best[0])):
            best = (total, cuts)
    return best
