"""Reference cases and the bundled synthetic campus dataset.

Run ``python3 -m loadopf.datasets`` to regenerate the files under
``loadopf/data``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .fitting import MeasurementSeries, Segmentation, fit_segments, segment_fit_joint
from .loads import BIGParams, PQParams, ZIPParams, equivalent_admittance, nominal_power
from .network import Branch, Bus, Generator, GridCase, Load, validate_case

CAMPUS_LOAD_BUSES = (2, 3, 4)

# First-segment campus loads.  ZIP reactive power is q0 + i_q|V| + b_z|V|^2,
# so a susceptance B enters as b_z = -B.
CAMPUS_SEGMENT_ONE = {
    "pq": {
        2: PQParams(1.4499, 0.44594),
        3: PQParams(2.0868, 0.64185),
        4: PQParams(1.0589, 0.32567),
    },
    "zip": {
        2: ZIPParams(p0=1.1392, q0=-0.19632, i_p=0.4767, i_q=0.15877, g_z=-0.16338, b_z=0.50372),
        3: ZIPParams(p0=0.98408, q0=0.076938, i_p=0.70154, i_q=0.22081, g_z=0.42845, b_z=0.36053),
        4: ZIPParams(p0=0.49932, q0=0.03904, i_p=0.35596, i_q=0.11204, g_z=0.21739, b_z=0.18293),
    },
    "big": {
        2: BIGParams(alpha_r=1.5775, alpha_i=0.031136, g_b=-0.10372, b_b=-0.49365),
        3: BIGParams(alpha_r=2.2709, alpha_i=0.044819, g_b=-0.14931, b_b=-0.7106),
        4: BIGParams(alpha_r=0.65358, alpha_i=-0.13531, g_b=0.43166, b_b=-0.19968),
    },
}

DATA_DIR = "data"
CAMPUS_CASE_FILE = "campus.json"
CAMPUS_SEGMENTED_FILE = "campus_segmented.json"
THREE_BUS_FILE = "three_bus.json"


def measurement_file(bus: int) -> str:
    return f"campus_bus{bus}.csv"


def three_bus_case(kind: str = "pq") -> GridCase:
    """Meshed triangle: slack generator at bus 1, loads at buses 2 and 3.

    Load buses have a narrower band than the slack so either voltage
    limit can bind.  ``kind="y"`` swaps each PQ load for the admittance
    drawing the same power at 1 p.u.
    """
    buses = (
        Bus(1, "slack", 0.94, 1.06),
        Bus(2, "load", 0.95, 1.03),
        Bus(3, "load", 0.95, 1.03),
    )
    branches = (
        Branch(1, 2, 0.010, 0.04, 0.02),
        Branch(1, 3, 0.015, 0.05, 0.02),
        Branch(2, 3, 0.010, 0.04, 0.02),
    )
    generators = (Generator(1, 0.0, 4.0, -3.0, 3.0, (0.1, 1.0, 0.0)),)
    pq = {2: PQParams(0.9, 0.3), 3: PQParams(1.4, 0.5)}
    if kind == "pq":
        models = pq
    elif kind == "y":
        models = {bus: equivalent_admittance(m.p, m.q) for bus, m in pq.items()}
    else:
        raise ValueError(f"three_bus_case supports kinds 'pq' and 'y', got {kind!r}")
    loads = tuple(Load(bus, m) for bus, m in models.items())
    return validate_case(GridCase(buses, branches, generators, loads))


def three_bus_segmented():
    """One-segment PQ and Y families on :func:`three_bus_case`."""
    from .experiments import SegmentedCase

    families = {k: [{ld.bus: ld.model for ld in three_bus_case(k).loads}] for k in ("pq", "y")}
    return SegmentedCase(three_bus_case("pq"), families)


def campus_base_case(kind: str = "pq") -> GridCase:
    """Five-bus campus network with first-segment loads of the given kind.

    Generators sit at bus 1 (slack) and bus 5; buses 2 to 4 carry the
    measured loads and have a tighter voltage band.
    """
    buses = (
        Bus(1, "slack", 0.94, 1.06),
        Bus(2, "load", 0.96, 1.04),
        Bus(3, "load", 0.96, 1.04),
        Bus(4, "load", 0.96, 1.04),
        Bus(5, "generator", 0.94, 1.06),
    )
    branches = (
        Branch(1, 2, 0.010, 0.030, 0.02),
        Branch(1, 3, 0.020, 0.060, 0.02),
        Branch(2, 3, 0.015, 0.045, 0.01),
        Branch(2, 4, 0.015, 0.045, 0.01),
        Branch(3, 4, 0.005, 0.015, 0.01),
        Branch(3, 5, 0.010, 0.030, 0.02),
        Branch(4, 5, 0.020, 0.060, 0.02),
    )
    generators = (
        Generator(1, 0.0, 6.0, -4.0, 4.0, (0.5, 1.5, 0.0)),
        Generator(5, 0.0, 4.0, -4.0, 4.0, (0.2, 1.0, 0.0), p_set=2.0),
    )
    loads = tuple(Load(bus, m) for bus, m in CAMPUS_SEGMENT_ONE[kind].items())
    return validate_case(GridCase(buses, branches, generators, loads))


# Synthetic campus day: six load regimes (edges in 5-minute samples),
# each scaling the first-segment BIG currents and their G/B part.
_DAY = 288
_EDGES = (0, 72, 108, 144, 204, 252, 288)
_SCALE = (1.00, 0.78, 1.12, 1.20, 1.05, 0.90)
_GB = (1.0, 1.3, 0.9, 1.1, 0.8, 1.2)
_DAY_TWO = (1.03, 0.98, 1.02, 0.97, 1.04, 0.99)
CURRENT_NOISE = 0.02
VOLTAGE_NOISE = 0.02
SYNTHETIC_SEED = 2018


def true_segmentation(days: int = 2) -> Segmentation:
    cuts = [d * _DAY + e for d in range(days) for e in _EDGES[1:]]
    return Segmentation(tuple(cuts[:-1]), days * _DAY)


def synthetic_campus_series(seed: int = SYNTHETIC_SEED, days: int = 2) -> dict[int, MeasurementSeries]:
    """Two days of 5-minute voltage/current samples at the campus load buses.

    Currents follow time-varying BIG parameters with 2% complex noise;
    voltages wander around 1 p.u. and sag when demand is high.
    """
    rng = np.random.default_rng(seed)
    n = days * _DAY
    t = np.arange(n) * 300.0
    scale = np.empty(n)
    gb = np.empty(n)
    for d in range(days):
        for s in range(len(_SCALE)):
            a, b = d * _DAY + _EDGES[s], d * _DAY + _EDGES[s + 1]
            scale[a:b] = _SCALE[s] * (_DAY_TWO[s] if d % 2 else 1.0)
            gb[a:b] = _GB[s]
    out = {}
    for bus in CAMPUS_LOAD_BUSES:
        p = CAMPUS_SEGMENT_ONE["big"][bus]
        m = 1.0 + 0.01 * np.sin(2 * np.pi * t / 86400.0 - 1.0) - 0.03 * (scale - 1.0)
        m = m + VOLTAGE_NOISE * rng.standard_normal(n)
        v = m * np.exp(1j * 0.004 * rng.standard_normal(n))
        i = scale * complex(p.alpha_r, p.alpha_i) + scale * gb * complex(p.g_b, p.b_b) * v
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
        out[bus] = MeasurementSeries(bus, t, v, i + CURRENT_NOISE * np.abs(i) * noise)
    return out


def campus_segment_families(series: dict[int, MeasurementSeries], k: int = 12):
    """Shared BIG segmentation across buses, then PQ/ZIP/BIG refits per segment.

    Returns ``(segmentation, families)`` with ``families[kind][s][bus]``.
    """
    buses = sorted(series)
    seg, _ = segment_fit_joint([series[b] for b in buses], k, "big")
    families = {}
    for kind in ("pq", "zip", "big"):
        fits = {b: fit_segments(series[b], seg, kind) for b in buses}
        families[kind] = [{b: fits[b].segments[s].params for b in buses} for s in range(k)]
    return seg, families


def campus_segmented_case(series: dict[int, MeasurementSeries] | None = None, k: int = 12):
    from .experiments import SegmentedCase

    if series is None:
        series = synthetic_campus_series()
    _, families = campus_segment_families(series, k)
    return SegmentedCase(campus_base_case("pq"), families)


def y_family_from_pq(family):
    """Admittance loads drawing each PQ segment's power at 1 p.u."""
    return [{bus: equivalent_admittance(*nominal_power(m)) for bus, m in seg.items()} for seg in family]


def data_path(name: str) -> Path:
    return Path(str(resources.files("loadopf").joinpath(DATA_DIR, name)))


def load_bundled_series() -> dict[int, MeasurementSeries]:
    from .caseio import load_measurements

    return {bus: load_measurements(data_path(measurement_file(bus)), bus) for bus in CAMPUS_LOAD_BUSES}


def load_bundled_segmented():
    from .caseio import load_segmented

    return load_segmented(data_path(CAMPUS_SEGMENTED_FILE))


def write_bundled(directory: Path | None = None) -> list[Path]:
    from .caseio import measurements_to_csv, save_case, save_segmented

    directory = Path(directory) if directory else data_path("")
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    series = synthetic_campus_series()
    for bus, s in series.items():
        path = directory / measurement_file(bus)
        path.write_text(measurements_to_csv(s))
        written.append(path)
    # Fit from the serialized samples so the bundle is self-consistent.
    from .caseio import load_measurements

    series = {bus: load_measurements(directory / measurement_file(bus), bus) for bus in series}
    for name, case in ((THREE_BUS_FILE, three_bus_case("pq")), (CAMPUS_CASE_FILE, campus_base_case("pq"))):
        save_case(case, directory / name)
        written.append(directory / name)
    save_segmented(campus_segmented_case(series), directory / CAMPUS_SEGMENTED_FILE)
    written.append(directory / CAMPUS_SEGMENTED_FILE)
    return written


if __name__ == "__main__":
    for p in write_bundled():
        print(p)
