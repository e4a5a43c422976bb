"""Aggregated load models: PQ, ZIP, BIG and constant admittance (Y).

Every model maps a rectangular bus voltage ``V = v_r + j v_i`` to the
current drawn into the load (positive when flowing into the load) and to
the absorbed complex power ``S = V conj(I)``.  Besides values, each model
provides the 2x2 current Jacobian used by the Newton solvers and the
Hessian of a weighted current sum used by the OPF Lagrangian.

PQ and ZIP are "magnitude polynomial" loads: absorbed powers are quadratics
in ``|V|`` and the current follows from ``I = (P - jQ) V / |V|^2``.  BIG and Y
are affine in the rectangular voltage, so their Jacobians are constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import ClassVar, Union

import numpy as np

from .exceptions import VoltageCollapse, ZeroVoltage

# Floor on |V| for PQ/ZIP evaluation, guards the 1/|V|^2 singularity.
EPS_V = 1e-4

POWER_TYPE = "power-type"
IMPEDANCE_TYPE = "impedance-type"
MIXED = "mixed"


@dataclass(frozen=True)
class OperatingVoltage:
    v_r: float
    v_i: float = 0.0

    @property
    def magnitude(self) -> float:
        return math.hypot(self.v_r, self.v_i)

    @property
    def phasor(self) -> complex:
        return complex(self.v_r, self.v_i)

    @classmethod
    def from_complex(cls, v: complex) -> "OperatingVoltage":
        return cls(float(v.real), float(v.imag))


def as_voltage(v) -> OperatingVoltage:
    """Coerce a complex number, (v_r, v_i) pair or OperatingVoltage."""
    if isinstance(v, OperatingVoltage):
        return v
    if isinstance(v, (complex, float, int, np.number)):
        return OperatingVoltage.from_complex(complex(v))
    v_r, v_i = v
    return OperatingVoltage(float(v_r), float(v_i))


@dataclass(frozen=True)
class LoadEvaluation:
    i_r: float
    i_i: float
    p: float
    q: float
    d_p: tuple[float, float]
    d_q: tuple[float, float]


# -- helpers for c.v / |v|^2 ------------------------------------------------


def _ratio_terms(v_r, v_i, c):
    """Value, gradient and Hessian of ``(c . v) / |v|^2`` in (v_r, v_i)."""
    v = np.array([v_r, v_i])
    c = np.asarray(c, dtype=float)
    s = v @ v
    a = c @ v
    val = a / s
    grad = c / s - 2.0 * a * v / s**2
    vv = np.outer(v, v)
    hess = -2.0 * (np.outer(c, v) + np.outer(v, c)) / s**2 + a * (-2.0 * np.eye(2) / s**2 + 8.0 * vv / s**3)
    return val, grad, hess


def injection_terms(v_r, v_i, w_r=1.0, w_i=0.0):
    """Terms for a constant-power current ``(P - jQ) V / |V|^2`` weighted by (w_r, w_i).

    Returns ``(u, grad_u, hess_u), (w, grad_w, hess_w)`` such that the
    weighted current ``w_r*i_r + w_i*i_i`` equals ``P*u + Q*w``.
    """
    return _ratio_terms(v_r, v_i, (w_r, w_i)), _ratio_terms(v_r, v_i, (-w_i, w_r))


class _MagnitudePolynomialLoad:
    """Shared machinery for loads whose P and Q are quadratics in |V|."""

    def _coeffs(self) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
        raise NotImplementedError

    def _check(self, v_r, v_i):
        m = math.hypot(v_r, v_i)
        if m <= EPS_V:
            raise VoltageCollapse(m)
        return m

    def power(self, v_r, v_i):
        m = self._check(v_r, v_i)
        (p0, p1, p2), (q0, q1, q2) = self._coeffs()
        return p0 + p1 * m + p2 * m * m, q0 + q1 * m + q2 * m * m

    def power_gradient(self, v_r, v_i):
        m = self._check(v_r, v_i)
        (_, p1, p2), (_, q1, q2) = self._coeffs()
        dp = (p1 + 2.0 * p2 * m) / m
        dq = (q1 + 2.0 * q2 * m) / m
        return (dp * v_r, dp * v_i), (dq * v_r, dq * v_i)

    def current(self, v_r, v_i):
        p, q = self.power(v_r, v_i)
        s = v_r * v_r + v_i * v_i
        return (p * v_r + q * v_i) / s, (p * v_i - q * v_r) / s

    def current_jacobian(self, v_r, v_i):
        p, q = self.power(v_r, v_i)
        dp, dq = self.power_gradient(v_r, v_i)
        dp, dq = np.array(dp), np.array(dq)
        s = v_r * v_r + v_i * v_i
        v = np.array([v_r, v_i])
        n_r = p * v_r + q * v_i
        n_i = p * v_i - q * v_r
        grad_nr = dp * v_r + dq * v_i + np.array([p, q])
        grad_ni = dp * v_i - dq * v_r + np.array([-q, p])
        return np.vstack([grad_nr / s - 2.0 * n_r * v / s**2, grad_ni / s - 2.0 * n_i * v / s**2])

    def current_hessian(self, v_r, v_i, w_r, w_i):
        m = self._check(v_r, v_i)
        (p0, p1, p2), (q0, q1, q2) = self._coeffs()
        v = np.array([v_r, v_i])
        grad_m = v / m
        hess_m = (np.eye(2) - np.outer(v, v) / (m * m)) / m
        (u, gu, hu), (w, gw, hw) = injection_terms(v_r, v_i, w_r, w_i)
        out = np.zeros((2, 2))
        for (c0, c1, c2), r, gr, hr in (((p0, p1, p2), u, gu, hu), ((q0, q1, q2), w, gw, hw)):
            val = c0 + c1 * m + c2 * m * m
            d1 = c1 + 2.0 * c2 * m
            out += 2.0 * c2 * np.outer(grad_m, grad_m) * r
            out += d1 * hess_m * r
            out += d1 * (np.outer(grad_m, gr) + np.outer(gr, grad_m))
            out += val * hr
        return out

    def p_margins(self, v_r, v_i):
        m = math.hypot(v_r, v_i)
        (_, p1, p2), _ = self._coeffs()
        return (p1 + 2.0 * p2 * m,)

    def q_margins(self, v_r, v_i):
        m = math.hypot(v_r, v_i)
        _, (_, q1, q2) = self._coeffs()
        return (q1 + 2.0 * q2 * m,)


class _AffineCurrentLoad:
    """Loads with ``I = alpha + (G + jB) V``; Jacobian is voltage independent."""

    def _affine(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def current(self, v_r, v_i):
        a_r, a_i, g, b = self._affine()
        return a_r + g * v_r - b * v_i, a_i + g * v_i + b * v_r

    def power(self, v_r, v_i):
        a_r, a_i, g, b = self._affine()
        s = v_r * v_r + v_i * v_i
        return a_r * v_r + a_i * v_i + g * s, a_r * v_i - a_i * v_r - b * s

    def power_gradient(self, v_r, v_i):
        a_r, a_i, g, b = self._affine()
        return (a_r + 2.0 * g * v_r, a_i + 2.0 * g * v_i), (-a_i - 2.0 * b * v_r, a_r - 2.0 * b * v_i)

    def current_jacobian(self, v_r, v_i):
        _, _, g, b = self._affine()
        return np.array([[g, -b], [b, g]])

    def current_hessian(self, v_r, v_i, w_r, w_i):
        return np.zeros((2, 2))


@dataclass(frozen=True)
class PQParams(_MagnitudePolynomialLoad):
    """Constant power demand; the current scales as 1/|V|."""

    kind: ClassVar[str] = "pq"
    p: float
    q: float

    def _coeffs(self):
        return (self.p, 0.0, 0.0), (self.q, 0.0, 0.0)

    def p_margins(self, v_r, v_i):
        return (0.0,)

    def q_margins(self, v_r, v_i):
        return (0.0,)


@dataclass(frozen=True)
class ZIPParams(_MagnitudePolynomialLoad):
    """``P = p0 + i_p|V| + g_z|V|^2`` and ``Q = q0 + i_q|V| + b_z|V|^2``.

    ``b_z`` is the |V|^2 coefficient of the *absorbed* reactive power, so an
    inductive impedance has ``b_z > 0``.  This is the opposite sign of a
    susceptance.
    """

    kind: ClassVar[str] = "zip"
    p0: float
    q0: float
    i_p: float
    i_q: float
    g_z: float
    b_z: float

    def _coeffs(self):
        return (self.p0, self.i_p, self.g_z), (self.q0, self.i_q, self.b_z)


@dataclass(frozen=True)
class BIGParams(_AffineCurrentLoad):
    """Constant current source in parallel with an admittance ``g_b + j b_b``."""

    kind: ClassVar[str] = "big"
    alpha_r: float
    alpha_i: float
    g_b: float
    b_b: float

    def _affine(self):
        return self.alpha_r, self.alpha_i, self.g_b, self.b_b

    def p_margins(self, v_r, v_i):
        return (self.alpha_r + 2.0 * self.g_b * v_r, self.alpha_i + 2.0 * self.g_b * v_i)

    def q_margins(self, v_r, v_i):
        return (-self.alpha_i - 2.0 * self.b_b * v_r, self.alpha_r - 2.0 * self.b_b * v_i)


@dataclass(frozen=True)
class YParams(_AffineCurrentLoad):
    """Constant admittance ``g + jb``; absorbs ``q = -b|V|^2``."""

    kind: ClassVar[str] = "y"
    g: float
    b: float

    def _affine(self):
        return 0.0, 0.0, self.g, self.b

    # Classified through its ZIP equivalent (g_z = g, b_z = -b), i.e. in |V|.
    def p_margins(self, v_r, v_i):
        return (2.0 * self.g * math.hypot(v_r, v_i),)

    def q_margins(self, v_r, v_i):
        return (-2.0 * self.b * math.hypot(v_r, v_i),)


LoadModel = Union[PQParams, ZIPParams, BIGParams, YParams]

MODEL_TYPES: dict[str, type] = {cls.kind: cls for cls in (PQParams, ZIPParams, BIGParams, YParams)}

# JSON "params" key -> dataclass field, per model kind.
PARAM_KEYS: dict[str, dict[str, str]] = {
    "pq": {"p": "p", "q": "q"},
    "zip": {"p0": "p0", "q0": "q0", "ip": "i_p", "iq": "i_q", "g": "g_z", "b": "b_z"},
    "big": {"alpha_r": "alpha_r", "alpha_i": "alpha_i", "g": "g_b", "b": "b_b"},
    "y": {"g": "g", "b": "b"},
}


def model_from_params(kind: str, params: dict) -> LoadModel:
    """Build a load model from its JSON ``params`` object."""
    if kind not in PARAM_KEYS:
        raise ValueError(f"unknown load model {kind!r}; expected one of {sorted(PARAM_KEYS)}")
    keys = PARAM_KEYS[kind]
    missing = sorted(set(keys) - set(params))
    if missing:
        raise KeyError(f"{kind} params missing {missing}")
    extra = sorted(set(params) - set(keys))
    if extra:
        raise KeyError(f"{kind} params has unknown keys {extra}")
    values = {}
    for key, field in keys.items():
        value = float(params[key])
        if not math.isfinite(value):
            raise ValueError(f"{kind} parameter {key!r} is not finite")
        values[field] = value
    return MODEL_TYPES[kind](**values)


def model_to_params(model: LoadModel) -> dict:
    fields = asdict(model)
    return {key: fields[field] for key, field in PARAM_KEYS[model.kind].items()}


def evaluate(model: LoadModel, v) -> LoadEvaluation:
    """Currents, absorbed powers and power gradients of ``model`` at ``v``."""
    v = as_voltage(v)
    i_r, i_i = model.current(v.v_r, v.v_i)
    p, q = model.power(v.v_r, v.v_i)
    d_p, d_q = model.power_gradient(v.v_r, v.v_i)
    return LoadEvaluation(
        i_r=float(i_r),
        i_i=float(i_i),
        p=float(p),
        q=float(q),
        d_p=(float(d_p[0]), float(d_p[1])),
        d_q=(float(d_q[0]), float(d_q[1])),
    )


@dataclass(frozen=True)
class ClassificationReport:
    p_class: str
    q_class: str
    joint: str
    p_margins: tuple[float, ...]
    q_margins: tuple[float, ...]
    at: OperatingVoltage

    @property
    def margins(self) -> tuple[float, ...]:
        return self.p_margins + self.q_margins

    def as_dict(self) -> dict:
        return {
            "p_class": self.p_class,
            "q_class": self.q_class,
            "joint": self.joint,
            "p_margins": list(self.p_margins),
            "q_margins": list(self.q_margins),
            "at": [self.at.v_r, self.at.v_i],
        }


def _verdict(margins) -> str:
    # Boundary value 0 counts as power-type (non-strict inequality).
    return POWER_TYPE if all(m <= 0.0 for m in margins) else IMPEDANCE_TYPE


def classify(model: LoadModel, v=OperatingVoltage(1.0, 0.0)) -> ClassificationReport:
    """Label ``model`` power-type or impedance-type from its voltage sensitivities at ``v``."""
    v = as_voltage(v)
    if v.magnitude <= 0.0:
        raise ZeroVoltage("classification needs a nonzero voltage")
    p_m = tuple(float(x) for x in model.p_margins(v.v_r, v.v_i))
    q_m = tuple(float(x) for x in model.q_margins(v.v_r, v.v_i))
    p_class, q_class = _verdict(p_m), _verdict(q_m)
    joint = p_class if p_class == q_class else MIXED
    return ClassificationReport(p_class, q_class, joint, p_m, q_m, v)


def mpt_margin(model: LoadModel, v=OperatingVoltage(1.0, 0.0)) -> float:
    """Largest real-power sensitivity condition; ``<= 0`` means power-type in P."""
    v = as_voltage(v)
    return float(max(model.p_margins(v.v_r, v.v_i)))


def equivalent_admittance(p: float, q: float, v_nom=OperatingVoltage(1.0, 0.0)) -> YParams:
    """Admittance absorbing exactly ``(p, q)`` at ``v_nom``."""
    v = as_voltage(v_nom)
    s = v.v_r**2 + v.v_i**2
    if s <= 0.0:
        raise ZeroVoltage("equivalent admittance needs a nonzero nominal voltage")
    return YParams(g=p / s, b=-q / s)


def nominal_power(model: LoadModel, v=OperatingVoltage(1.0, 0.0)) -> tuple[float, float]:
    v = as_voltage(v)
    p, q = model.power(v.v_r, v.v_i)
    return float(p), float(q)
