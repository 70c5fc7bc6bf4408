"""Scalar, metric and 1-form fields on charts, with jet evaluation.

A field is a formula in the chart coordinates; the chart argument of the jet
evaluators is used for domain checks.  Formulas are written against the
dispatching math in :mod:`weylgeo.jets`, so the same callable produces plain
values, batched values, or Taylor jets, which is the production derivative
path.  ``fd_oracle`` stays the referee.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import jets as jm
from .errors import DomainError, GeometryError, JetOrderError, SingularMetricError
from .jets import Jet2

_SYM_TOL = 1e-10
MAX_POLY_DEGREE = 6


# ----------------------------------------------------------------------
# jet containers
# ----------------------------------------------------------------------
@dataclass
class ScalarJet:
    """Pointwise scalar value with partials; arrays may carry batch axes."""

    value: float
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None
    third: np.ndarray | None = None

    def __post_init__(self):
        if self.hess is not None:
            if np.max(np.abs(self.hess[..., 0, 1] - self.hess[..., 1, 0])) > _SYM_TOL:
                raise GeometryError("hessian must be symmetric")


@dataclass
class MetricJet:
    """Pointwise metric with optional first/second coordinate derivatives.

    dg[m, i, j] is the m-partial of g_ij; d2g[m, n, i, j] the (m, n) second
    partial.
    """

    g: np.ndarray
    dg: np.ndarray | None = None
    d2g: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if abs(g[0, 1] - g[1, 0]) > _SYM_TOL:
            raise SingularMetricError("metric must be symmetric")
        if g[0, 0] <= 0.0 or np.linalg.det(g) <= 0.0:
            raise SingularMetricError("metric must be positive definite")
        self.g = g

    @property
    def inv(self):
        return np.linalg.inv(self.g)

    @property
    def det(self):
        return float(np.linalg.det(self.g))


@dataclass
class OneFormJet:
    b: np.ndarray
    db: np.ndarray | None = None  # db[m, i] = d_m beta_i

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)


# ----------------------------------------------------------------------
# scalar fields
# ----------------------------------------------------------------------
class ScalarField:
    def __init__(self, fn, name="scalar", domain_radius=None):
        self._fn = fn
        self.name = name
        self.domain_radius = domain_radius

    def __call__(self, x, y):
        return self._fn(x, y)

    def _check_domain(self, chart, p, margin=0.0):
        p = np.asarray(p, dtype=float)
        if not bool(np.all(chart.contains(p, margin=margin))):
            raise DomainError(f"point outside chart {chart.name}")
        if self.domain_radius is not None:
            r = np.sqrt(np.sum(p * p, axis=-1))
            if np.any(r >= self.domain_radius - 1e-9):
                raise DomainError(f"point outside the {self.name} field domain")

    def jet(self, chart, p, order=2) -> ScalarJet:
        p = np.asarray(p, dtype=float)
        self._check_domain(chart, p)
        X, Y = Jet2.variables(p[..., 0], p[..., 1], order)
        out = self._fn(X, Y)
        if not isinstance(out, Jet2):
            out = Jet2.constant(np.broadcast_to(out, X.value.shape), order)
        return ScalarJet(
            value=out.value,
            grad=out.grad if order >= 1 else None,
            hess=out.hess if order >= 2 else None,
            third=out.third if order >= 3 else None,
        )


def round_factor():
    """Conformal factor of the unit sphere in either stereographic chart."""
    return ScalarField(lambda x, y: np.log(2.0) - jm.log(1.0 + x * x + y * y), name="round")


def flat_factor():
    return ScalarField(lambda x, y: 0.0 * x, name="flat")


def hyperbolic_factor():
    """Factor of the curvature -1 disc metric; defined for r < 1 only."""
    return ScalarField(
        lambda x, y: np.log(2.0) - jm.log(1.0 - x * x - y * y),
        name="hyperbolic",
        domain_radius=1.0,
    )


def bump_factor(height=0.3, width=0.8):
    w2 = float(width) ** 2
    return ScalarField(lambda x, y: height * jm.exp((x * x + y * y) * (-1.0 / w2)), name="bump")


def _poly_eval(coeffs, x, y):
    # row-major: coeffs[i][j] multiplies x^i y^j
    acc = 0.0 * x
    for i, row in enumerate(coeffs):
        xi = x**i if i else 1.0
        for j, c in enumerate(row):
            if c == 0.0:
                continue
            term = c * xi
            if j:
                term = term * y**j
            acc = acc + term
    return acc


def _check_poly(coeffs):
    coeffs = [[float(c) for c in row] for row in coeffs]
    deg = max(
        (i + j for i, row in enumerate(coeffs) for j, c in enumerate(row) if c != 0.0),
        default=0,
    )
    if deg > MAX_POLY_DEGREE:
        raise GeometryError(f"polynomial degree {deg} exceeds {MAX_POLY_DEGREE}")
    return coeffs


def poly_factor(coeffs, name="poly"):
    coeffs = _check_poly(coeffs)
    return ScalarField(lambda x, y: _poly_eval(coeffs, x, y), name=name)


def random_poly_factor(rng, degree=4, scale=0.1):
    c = scale * rng.standard_normal((degree + 1, degree + 1))
    for i in range(degree + 1):
        for j in range(degree + 1):
            if i + j > degree:
                c[i, j] = 0.0
    return poly_factor(c.tolist(), name="random-poly")


# ----------------------------------------------------------------------
# 1-form fields
# ----------------------------------------------------------------------
class OneFormField:
    def __init__(self, fn, name="oneform"):
        self._fn = fn
        self.name = name

    def __call__(self, x, y):
        return self._fn(x, y)

    def jet(self, chart, p, order=1) -> OneFormJet:
        p = np.asarray(p, dtype=float)
        if not bool(np.all(chart.contains(p))):
            raise DomainError(f"point outside chart {chart.name}")
        X, Y = Jet2.variables(p[..., 0], p[..., 1], max(order, 0) if order >= 0 else 0)
        b1, b2 = self._fn(X, Y)
        comps = []
        for b in (b1, b2):
            if not isinstance(b, Jet2):
                b = Jet2.constant(np.broadcast_to(b, X.value.shape), X.order)
            comps.append(b)
        b = np.stack([comps[0].value, comps[1].value], axis=-1)
        db = None
        if order >= 1:
            db = np.stack([comps[0].grad, comps[1].grad], axis=-1)
            # db[m, i] = d_m beta_i;  grad axis is m
        return OneFormJet(b=b, db=db)


def zero_one_form():
    return OneFormField(lambda x, y: (0.0 * x, 0.0 * x), name="zero")


def constant_one_form(b1, b2, name="constant"):
    return OneFormField(lambda x, y: (b1 + 0.0 * x, b2 + 0.0 * x), name=name)


def poly_one_form(c1, c2, name="poly"):
    c1 = _check_poly(c1)
    c2 = _check_poly(c2)
    return OneFormField(lambda x, y: (_poly_eval(c1, x, y), _poly_eval(c2, x, y)), name=name)


class ExactOneForm(OneFormField):
    """df of a scalar field, evaluated through one extra jet order."""

    def __init__(self, f: ScalarField, sign=1.0):
        self.f = f
        self.sign = float(sign)
        super().__init__(None, name=f"d({f.name})")

    def __call__(self, x, y):
        raise GeometryError("exact forms are evaluated through jets")

    def jet(self, chart, p, order=1) -> OneFormJet:
        fj = self.f.jet(chart, p, order=order + 1)
        b = self.sign * fj.grad
        db = self.sign * fj.hess if order >= 1 else None
        return OneFormJet(b=b, db=db)


# ----------------------------------------------------------------------
# metric fields
# ----------------------------------------------------------------------
class ConformalMetric:
    """g = e^{2f} * identity in the chart coordinates."""

    def __init__(self, factor: ScalarField):
        self.factor = factor
        self.is_conformal = True

    def jet(self, chart, p, order=2) -> MetricJet:
        fj = self.factor.jet(chart, p, order=order)
        e2f = float(np.exp(2.0 * fj.value))
        g = e2f * np.eye(2)
        dg = None
        d2g = None
        if order >= 1:
            dg = np.einsum("m,ij->mij", 2.0 * fj.grad, g)
        if order >= 2:
            coef = 2.0 * fj.hess + 4.0 * np.outer(fj.grad, fj.grad)
            d2g = np.einsum("mn,ij->mnij", coef, g)
        return MetricJet(g=g, dg=dg, d2g=d2g)


class MatrixMetric:
    """Full symmetric metric from a formula (x, y) -> (g11, g12, g22)."""

    def __init__(self, fn, name="matrix-metric"):
        self._fn = fn
        self.name = name
        self.is_conformal = False

    def jet(self, chart, p, order=2) -> MetricJet:
        p = np.asarray(p, dtype=float)
        if not bool(np.all(chart.contains(p))):
            raise DomainError(f"point outside chart {chart.name}")
        X, Y = Jet2.variables(p[..., 0], p[..., 1], order)
        comps = []
        for v in self._fn(X, Y):
            if not isinstance(v, Jet2):
                v = Jet2.constant(np.broadcast_to(v, X.value.shape), order)
            comps.append(v)
        g11, g12, g22 = comps
        g = np.array([[g11.value, g12.value], [g12.value, g22.value]], dtype=float)
        dg = None
        d2g = None
        if order >= 1:
            dg = np.zeros((2, 2, 2))
            for m in range(2):
                dg[m] = [
                    [g11.grad[m], g12.grad[m]],
                    [g12.grad[m], g22.grad[m]],
                ]
        if order >= 2:
            d2g = np.zeros((2, 2, 2, 2))
            for m in range(2):
                for n in range(2):
                    d2g[m, n] = [
                        [g11.hess[m, n], g12.hess[m, n]],
                        [g12.hess[m, n], g22.hess[m, n]],
                    ]
        return MetricJet(g=g, dg=dg, d2g=d2g)


def identity_metric():
    return ConformalMetric(flat_factor())


# ----------------------------------------------------------------------
# spec'd free-function surface
# ----------------------------------------------------------------------
def eval_jet(field, chart, p, order):
    """Evaluate a field jet; the derivative depth carried depends on the kind.

    Scalar fields support order 0..3, metric fields 0..2, 1-form fields 0..1.
    """
    if isinstance(field, ScalarField):
        if not 0 <= order <= 3:
            raise JetOrderError(f"scalar jets support order 0..3, got {order}")
        return field.jet(chart, p, order=order)
    if isinstance(field, (ConformalMetric, MatrixMetric)):
        if not 0 <= order <= 2:
            raise JetOrderError(f"metric jets support order 0..2, got {order}")
        return field.jet(chart, p, order=order)
    if isinstance(field, OneFormField):
        if not 0 <= order <= 1:
            raise JetOrderError(f"1-form jets support order 0..1, got {order}")
        return field.jet(chart, p, order=order)
    raise GeometryError(f"not a field: {type(field).__name__}")


# ----------------------------------------------------------------------
# JSON ingestion
# ----------------------------------------------------------------------
_FACTORS = {
    "round": round_factor,
    "flat": flat_factor,
    "hyperbolic": hyperbolic_factor,
}


def _beta_component(spec):
    if isinstance(spec, (int, float)):
        return [[float(spec)]]
    if isinstance(spec, list):
        if spec and isinstance(spec[0], list):
            return spec
        return [list(map(float, spec))]  # a flat list means coefficients of x^i
    raise GeometryError(f"bad 1-form component spec: {spec!r}")


@dataclass
class FieldConfig:
    factor: ScalarField
    beta: OneFormField
    metric: ConformalMetric = dc_field(init=False)

    def __post_init__(self):
        self.metric = ConformalMetric(self.factor)


def field_from_config(cfg: dict) -> FieldConfig:
    """Parse the documented field JSON: conformal factor plus optional beta.

    Schema::

        {"kind": "conformal",
         "f": "round" | "flat" | "hyperbolic" | {"poly": [[...], ...]},
         "beta": null | [component, component]}

    where a polynomial is a row-major coefficient table c[i][j] of x^i y^j with
    degree <= 6, and each beta component is a number or a coefficient table.
    """
    if cfg.get("kind", "conformal") != "conformal":
        raise GeometryError(f"unsupported field kind {cfg.get('kind')!r}")
    fspec = cfg.get("f", "flat")
    if isinstance(fspec, str):
        if fspec not in _FACTORS:
            raise GeometryError(f"unknown factor {fspec!r}")
        factor = _FACTORS[fspec]()
    elif isinstance(fspec, dict) and "poly" in fspec:
        factor = poly_factor(fspec["poly"])
    else:
        raise GeometryError(f"bad factor spec {fspec!r}")
    bspec = cfg.get("beta")
    if bspec is None:
        beta = zero_one_form()
    else:
        if not isinstance(bspec, list) or len(bspec) != 2:
            raise GeometryError("beta must be a two-component list")
        beta = poly_one_form(_beta_component(bspec[0]), _beta_component(bspec[1]))
    return FieldConfig(factor=factor, beta=beta)
