import numpy as np
import pytest

from loadopf.loads import BIGParams, PQParams, YParams, ZIPParams
from loadopf.network import Branch, Bus, Generator, GridCase, Load


def random_model(rng, kind=None):
    kind = kind or rng.choice(["pq", "zip", "big", "y"])
    u = lambda lo, hi: float(rng.uniform(lo, hi))  # noqa: E731
    if kind == "pq":
        return PQParams(u(0.1, 1.0), u(-0.3, 0.5))
    if kind == "zip":
        return ZIPParams(u(0.0, 0.6), u(-0.2, 0.3), u(-0.3, 0.5), u(-0.2, 0.2), u(-0.3, 0.5), u(-0.3, 0.3))
    if kind == "big":
        return BIGParams(u(0.1, 1.0), u(-0.2, 0.2), u(-0.2, 0.5), u(-0.5, 0.2))
    return YParams(u(0.1, 1.0), u(-0.5, 0.1))


def random_case(rng, n, kinds=("pq", "zip", "big", "y"), with_pv=True):
    """Connected n-bus case: a random spanning tree plus a few chords."""
    buses = [Bus(1, "slack")]
    for k in range(2, n + 1):
        kind = "generator" if with_pv and k == n else "load"
        buses.append(Bus(k, kind, v_set=1.01))
    edges = {(int(rng.integers(1, k)), k) for k in range(2, n + 1)}
    for _ in range(n // 2):
        a, b = sorted(rng.choice(np.arange(1, n + 1), 2, replace=False))
        edges.add((int(a), int(b)))
    branches = [
        Branch(a, b, float(rng.uniform(0.005, 0.03)), float(rng.uniform(0.02, 0.1)), float(rng.uniform(0.0, 0.03)))
        for a, b in sorted(edges)
    ]
    gens = [Generator(1, 0.0, 10.0, -10.0, 10.0)]
    if with_pv:
        gens.append(Generator(n, 0.0, 2.0, -5.0, 5.0, p_set=0.3))
    loads = [Load(k, random_model(rng, str(rng.choice(kinds)))) for k in range(2, n + 1) if buses[k - 1].kind == "load"]
    return GridCase(tuple(buses), tuple(branches), tuple(gens), tuple(loads))


def two_bus_case(model, r=0.05, x=0.1, load_bounds=(0.8, 1.2), gen_bounds=(0.94, 1.06), cost=(0.0, 1.0, 0.0)):
    return GridCase(
        (Bus(1, "slack", *gen_bounds), Bus(2, "load", *load_bounds)),
        (Branch(1, 2, r, x),),
        (Generator(1, 0.0, 10.0, -10.0, 10.0, cost),),
        (Load(2, model),),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
