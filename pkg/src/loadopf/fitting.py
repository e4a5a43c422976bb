"""Characterize measured voltage/current series as PQ, ZIP or BIG loads.

PQ and ZIP are fit by least squares on the measured powers, BIG by least
squares on the measured currents.  Errors are always reported in the
current domain so the three kinds are comparable.

``segment_fit`` partitions a series into K contiguous segments minimizing
the total squared current residual, by exact dynamic programming over
segment costs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .exceptions import EmptySeries, RankDeficient, TooShort, ZeroCurrentNormalization
from .loads import BIGParams, LoadModel, PQParams, ZIPParams

KINDS = ("pq", "zip", "big")
DEFAULT_MIN_LEN = 4


@dataclass(frozen=True)
class MeasurementSample:
    t: float
    v_r: float
    v_i: float
    i_r: float
    i_i: float


@dataclass
class MeasurementSeries:
    """One bus's samples, held as arrays (``v`` and ``i`` complex)."""

    bus: int
    t: np.ndarray
    v: np.ndarray
    i: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=complex)
        self.i = np.asarray(self.i, dtype=complex)
        if self.t.size == 0:
            raise EmptySeries(f"series for bus {self.bus} has no samples")
        if not (self.t.shape == self.v.shape == self.i.shape):
            raise ValueError("t, v and i must have the same length")
        if np.any(np.abs(self.v) <= 0.0):
            raise ValueError("every sample needs a nonzero voltage")
        if np.any(np.diff(self.t) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")

    @classmethod
    def from_samples(cls, bus: int, samples: Sequence[MeasurementSample]) -> "MeasurementSeries":
        if not samples:
            raise EmptySeries(f"series for bus {bus} has no samples")
        t = [s.t for s in samples]
        v = [complex(s.v_r, s.v_i) for s in samples]
        i = [complex(s.i_r, s.i_i) for s in samples]
        return cls(bus, t, v, i)

    @property
    def samples(self) -> list[MeasurementSample]:
        return [
            MeasurementSample(float(t), v.real, v.imag, i.real, i.imag) for t, v, i in zip(self.t, self.v, self.i)
        ]

    def __len__(self):
        return self.t.size

    def slice(self, start: int, stop: int) -> "MeasurementSeries":
        return MeasurementSeries(self.bus, self.t[start:stop], self.v[start:stop], self.i[start:stop])


Samples = Union[MeasurementSeries, Sequence[MeasurementSample]]


@dataclass(frozen=True)
class Segmentation:
    """Internal split indices; K segments have K - 1 boundaries."""

    boundaries: tuple[int, ...]
    length: int

    @property
    def segments(self) -> list[tuple[int, int]]:
        edges = (0, *self.boundaries, self.length)
        return list(zip(edges[:-1], edges[1:]))


@dataclass
class SegmentFit:
    start: int
    stop: int
    params: LoadModel
    rms: float
    sse: float


@dataclass
class FitResult:
    kind: str
    segments: list[SegmentFit] = field(default_factory=list)

    @property
    def total_rms(self) -> float:
        return float(np.mean([s.rms for s in self.segments]))

    @property
    def total_sse(self) -> float:
        return float(sum(s.sse for s in self.segments))


def _arrays(samples: Samples):
    if isinstance(samples, MeasurementSeries):
        return samples.v, samples.i
    if len(samples) == 0:
        raise EmptySeries("no samples")
    v = np.array([complex(s.v_r, s.v_i) for s in samples])
    i = np.array([complex(s.i_r, s.i_i) for s in samples])
    return v, i


def measured_power(v, i):
    s = v * np.conj(i)
    return s.real, s.imag


def model_currents(model: LoadModel, v: np.ndarray) -> np.ndarray:
    """Vectorized drawn current of ``model`` at each voltage in ``v``."""
    v = np.asarray(v, dtype=complex)
    out = [complex(*model.current(x.real, x.imag)) for x in v.ravel()]
    return np.array(out, dtype=complex).reshape(v.shape)


# -- per-kind linear structure --------------------------------------------


def _magnitude_basis(v):
    m = np.abs(v)
    return np.stack([np.ones_like(m), m, m * m], axis=1)


def _current_basis(kind: str, v: np.ndarray) -> np.ndarray:
    """Complex columns ``a_j(V)`` with drawn current ``I = sum theta_j a_j``."""
    ratio = v / np.abs(v) ** 2
    if kind == "pq":
        return np.stack([ratio, -1j * ratio], axis=1)
    if kind == "zip":
        phi = _magnitude_basis(v)
        return np.concatenate([phi * ratio[:, None], -1j * phi * ratio[:, None]], axis=1)
    if kind == "big":
        return np.stack([np.ones_like(v), 1j * np.ones_like(v), v, 1j * v], axis=1)
    raise ValueError(f"unknown model kind {kind!r}")


def _params_from_theta(kind: str, theta) -> LoadModel:
    theta = [float(x) for x in theta]
    if kind == "pq":
        return PQParams(p=theta[0], q=theta[1])
    if kind == "zip":
        p0, i_p, g_z, q0, i_q, b_z = theta
        return ZIPParams(p0=p0, q0=q0, i_p=i_p, i_q=i_q, g_z=g_z, b_z=b_z)
    alpha_r, alpha_i, g_b, b_b = theta
    return BIGParams(alpha_r=alpha_r, alpha_i=alpha_i, g_b=g_b, b_b=b_b)


def _stacked(a: np.ndarray) -> np.ndarray:
    return np.concatenate([a.real, a.imag], axis=0)


def _theta(kind: str, v, i) -> np.ndarray:
    """Least-squares parameters (minimum norm when rank deficient)."""
    if kind == "pq":
        p, q = measured_power(v, i)
        return np.array([p.mean(), q.mean()])
    if kind == "zip":
        p, q = measured_power(v, i)
        phi = _magnitude_basis(v)
        bp = np.linalg.lstsq(phi, p, rcond=None)[0]
        bq = np.linalg.lstsq(phi, q, rcond=None)[0]
        return np.concatenate([bp, bq])
    A = _current_basis("big", v)
    return np.linalg.lstsq(_stacked(A), _stacked(i), rcond=None)[0]


def _distinct_magnitudes(v) -> int:
    m = np.sort(np.abs(v))
    return 1 + int(np.sum(np.diff(m) > 1e-12 * max(1.0, m[-1])))


def fit_pq(samples: Samples) -> PQParams:
    """Mean measured real and reactive power."""
    v, i = _arrays(samples)
    return _params_from_theta("pq", _theta("pq", v, i))


def fit_zip(samples: Samples) -> ZIPParams:
    """Quadratic-in-|V| fits of measured P and Q."""
    v, i = _arrays(samples)
    if _distinct_magnitudes(v) < 3:
        raise RankDeficient("ZIP fit needs at least 3 distinct voltage magnitudes")
    return _params_from_theta("zip", _theta("zip", v, i))


def fit_big(samples: Samples) -> BIGParams:
    """Affine current fit ``I = alpha + (G + jB) V``."""
    v, i = _arrays(samples)
    if np.linalg.matrix_rank(_stacked(_current_basis("big", v))) < 4:
        raise RankDeficient("BIG fit needs at least two distinct voltage phasors")
    return _params_from_theta("big", _theta("big", v, i))


FITTERS = {"pq": fit_pq, "zip": fit_zip, "big": fit_big}


def rms_error(samples: Samples, model: LoadModel) -> float:
    """RMS current error normalized by the mean measured current magnitude."""
    v, i = _arrays(samples)
    scale = float(np.mean(np.abs(i)))
    if scale == 0.0:
        raise ZeroCurrentNormalization("mean measured current is zero")
    err = i - model_currents(model, v)
    return float(np.sqrt(np.mean(np.abs(err) ** 2)) / scale)


def current_sse(samples: Samples, model: LoadModel) -> float:
    v, i = _arrays(samples)
    return float(np.sum(np.abs(i - model_currents(model, v)) ** 2))


# -- segmentation ----------------------------------------------------------


def _sample_terms(kind: str, v, i):
    """Per-sample contributions to the fit and current-domain normal equations."""
    A = _current_basis(kind, v)
    C = np.real(np.conj(A)[:, :, None] * A[:, None, :])
    d = np.real(np.conj(A) * i[:, None])
    e = np.abs(i) ** 2
    if kind == "big":
        return C, d, e, C, d
    phi = _magnitude_basis(v)
    if kind == "pq":
        phi = phi[:, :1]
    p, q = measured_power(v, i)
    k = phi.shape[1]
    F = np.zeros((v.size, 2 * k, 2 * k))
    F[:, :k, :k] = phi[:, :, None] * phi[:, None, :]
    F[:, k:, k:] = F[:, :k, :k]
    f = np.concatenate([phi * p[:, None], phi * q[:, None]], axis=1)
    return C, d, e, F, f


def segment_costs(kind: str, v, i, min_len: int) -> np.ndarray:
    """``cost[a, b]`` = current-domain SSE of one fit over samples ``a:b``.

    Entries for segments shorter than ``min_len`` are ``inf``.
    """
    n = v.size
    C, d, e, F, f = _sample_terms(kind, v, i)
    cost = np.full((n + 1, n + 1), np.inf)
    for a in range(n - min_len + 1):
        Cc, dc, ec = np.cumsum(C[a:], 0), np.cumsum(d[a:], 0), np.cumsum(e[a:])
        Fc, fc = np.cumsum(F[a:], 0), np.cumsum(f[a:], 0)
        sel = slice(min_len - 1, None)
        theta = np.einsum("bij,bj->bi", np.linalg.pinv(Fc[sel], hermitian=True), fc[sel])
        sse = ec[sel] - 2.0 * np.einsum("bi,bi->b", theta, dc[sel]) + np.einsum("bi,bij,bj->b", theta, Cc[sel], theta)
        cost[a, a + min_len :] = np.maximum(sse, 0.0)
    return cost


def _partition(cost: np.ndarray, k: int, min_len: int) -> tuple[int, ...]:
    """Optimal K-segmentation; leftmost boundaries among equal-cost optima."""
    n = cost.shape[0] - 1
    # best[r][a]: minimal cost of splitting samples a:n into r segments.
    best = np.full((k + 1, n + 1), np.inf)
    best[0, n] = 0.0
    for r in range(1, k + 1):
        for a in range(n - r * min_len, -1, -1):
            cand = cost[a, a + min_len : n + 1] + best[r - 1, a + min_len : n + 1]
            best[r, a] = np.min(cand)
    if not np.isfinite(best[k, 0]):
        raise TooShort("no admissible segmentation")
    boundaries = []
    a = 0
    for r in range(k, 1, -1):
        cand = cost[a, a + min_len : n + 1] + best[r - 1, a + min_len : n + 1]
        tol = 1e-9 * (1.0 + abs(best[r, a]))
        b = a + min_len + int(np.flatnonzero(cand <= best[r, a] + tol)[0])
        boundaries.append(b)
        a = b
    return tuple(boundaries)


def _fit_segment(kind: str, series: MeasurementSeries, start: int, stop: int) -> SegmentFit:
    v, i = series.v[start:stop], series.i[start:stop]
    try:
        params = FITTERS[kind](series.slice(start, stop))
    except RankDeficient:
        params = _params_from_theta(kind, _theta(kind, v, i))
    err = i - model_currents(params, v)
    scale = float(np.mean(np.abs(i)))
    rms = float(np.sqrt(np.mean(np.abs(err) ** 2)) / scale) if scale > 0.0 else 0.0
    return SegmentFit(start, stop, params, rms, float(np.sum(np.abs(err) ** 2)))


def fit_segments(series: MeasurementSeries, segmentation: Segmentation, kind: str) -> FitResult:
    """Fit ``kind`` on each segment of a fixed segmentation."""
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return FitResult(kind, [_fit_segment(kind, series, a, b) for a, b in segmentation.segments])


def _check_sizes(n, k, min_len):
    if k < 1 or min_len < 1:
        raise ValueError("k and min_len must be positive")
    if k * min_len > n:
        raise TooShort(f"{k} segments of at least {min_len} samples need {k * min_len} samples, have {n}")


def segment_fit(
    series: MeasurementSeries, k: int, kind: str, min_len: int = DEFAULT_MIN_LEN
) -> tuple[Segmentation, FitResult]:
    """Split ``series`` into ``k`` segments minimizing total squared current error."""
    seg, fits = segment_fit_joint([series], k, kind, min_len)
    return seg, fits[0]


def segment_fit_joint(
    series: Sequence[MeasurementSeries], k: int, kind: str, min_len: int = DEFAULT_MIN_LEN
) -> tuple[Segmentation, list[FitResult]]:
    """Common segmentation for time-aligned series (sum of per-series costs)."""
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if not series:
        raise EmptySeries("no series given")
    n = len(series[0])
    if any(len(s) != n for s in series):
        raise ValueError("jointly segmented series must have equal length")
    _check_sizes(n, k, min_len)
    cost = sum(segment_costs(kind, s.v, s.i, min_len) for s in series)
    seg = Segmentation(_partition(cost, k, min_len), n)
    return seg, [fit_segments(s, seg, kind) for s in series]
