import numpy as np
import pytest

from loadopf.datasets import (
    CAMPUS_LOAD_BUSES,
    campus_segment_families,
    data_path,
    load_bundled_series,
    load_bundled_segmented,
    synthetic_campus_series,
    three_bus_case,
    true_segmentation,
    write_bundled,
    y_family_from_pq,
)
from loadopf.loads import evaluate, nominal_power
from loadopf.network import validate_case


def test_regeneration_is_byte_identical(tmp_path):
    for path in write_bundled(tmp_path):
        assert path.read_bytes() == data_path(path.name).read_bytes(), path.name


def test_synthetic_series_shape():
    series = synthetic_campus_series()
    assert sorted(series) == list(CAMPUS_LOAD_BUSES)
    for s in series.values():
        assert len(s) == 576
        assert np.all(np.diff(s.t) == 300.0)
        assert 0.85 < np.abs(s.v).min() and np.abs(s.v).max() < 1.15


def test_bundled_segmentation_near_truth():
    seg_case = load_bundled_segmented()
    assert seg_case.n_segments == 12
    assert set(seg_case.kinds) == {"pq", "zip", "big"}
    truth = true_segmentation().boundaries
    assert truth == (72, 108, 144, 204, 252, 288, 360, 396, 432, 492, 540)
    found, _ = campus_segment_families(load_bundled_series())
    assert np.max(np.abs(np.subtract(found.boundaries, truth))) <= 3


def test_three_bus_variants_draw_same_nominal_power():
    pq, y = three_bus_case("pq"), three_bus_case("y")
    validate_case(pq)
    for a, b in zip(pq.loads, y.loads):
        assert nominal_power(a.model) == pytest.approx(nominal_power(b.model))
    with pytest.raises(ValueError):
        three_bus_case("zip")


def test_y_family_from_pq():
    fam = load_bundled_segmented().families["pq"]
    for seg_pq, seg_y in zip(fam, y_family_from_pq(fam)):
        for bus, m in seg_pq.items():
            e = evaluate(seg_y[bus], 1.0)
            assert (e.p, e.q) == pytest.approx((m.p, m.q))
