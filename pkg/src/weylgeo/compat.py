"""Compatibility between a conformal structure and a projective class.

Two routes are implemented.  In a chart that is isothermal for the conformal
structure the compatibility conditions read 3*kappa1 = kappa3 and
3*kappa2 = kappa0, and the compatible 1-form is

    beta = -kappa3 dx + kappa0 dy + df.

In an arbitrary chart we instead solve the four invariant-matching equations
for the two components of beta in least squares; the residual then measures
the obstruction.  The det = 1 representative is the canonical gauge for the
least-squares route.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import jets as jm
from .charts import Chart, chart_grid
from .connections import (
    ConnectionCoeffs,
    ProjectiveData,
    kappa_of_gamma,
    lc_gamma,
    pi_norm,
)
from .errors import GeometryError, IncompatibleStructureError
from .fields import (
    ConformalMetric,
    ExactOneForm,
    MatrixMetric,
    MetricJet,
    OneFormField,
    OneFormJet,
    ScalarField,
    ScalarJet,
)

DEFAULT_TOL = 1e-7


# ----------------------------------------------------------------------
# isothermal route
# ----------------------------------------------------------------------
def kappa_residual(f: ScalarJet, proj: ConnectionCoeffs) -> np.ndarray:
    """(3*kappa1 - kappa3, 3*kappa2 - kappa0) of the representative coefficients."""
    k = kappa_of_gamma(proj.gamma)
    return np.array([3.0 * k[..., 1] - k[..., 3], 3.0 * k[..., 2] - k[..., 0]]).T


def construct_beta(f: ScalarJet, proj: ConnectionCoeffs, tol=DEFAULT_TOL) -> OneFormJet:
    """beta = -kappa3 dx + kappa0 dy + df, valid when the residual vanishes."""
    res = kappa_residual(f, proj)
    if np.max(np.abs(res)) > tol:
        raise IncompatibleStructureError(
            f"kappa residual {np.max(np.abs(res)):.3e} above tolerance {tol:g}"
        )
    k = kappa_of_gamma(proj.gamma)
    if f.grad is None:
        raise GeometryError("construct_beta needs the factor gradient")
    b = np.array([-k[3] + f.grad[0], k[0] + f.grad[1]])
    db = None
    if proj.dgamma is not None and f.hess is not None:
        dk = kappa_of_gamma(np.moveaxis(proj.dgamma, 0, 0))  # (2, 4): dk[m]
        db = np.stack(
            [-dk[:, 3] + f.hess[:, 0], dk[:, 0] + f.hess[:, 1]], axis=-1
        )
    return OneFormJet(b=b, db=db)


# ----------------------------------------------------------------------
# least-squares route (any chart, det-1 gauge)
# ----------------------------------------------------------------------
# Rows are weighted so the residual is the Frobenius norm of the full
# invariant-tensor mismatch; see pi_norm.
_ROW_W = np.array([1.0, np.sqrt(3.0), np.sqrt(3.0), 1.0])


def _beta_design(g):
    """4x2 matrix A with kappa(weyl(g, b)) - kappa(LC) = A @ b_up (batch-safe)."""
    g11, g12, g22 = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
    zero = np.zeros_like(g11)
    rows = [
        [zero, g11],
        [-g11 / 3.0, 2.0 * g12 / 3.0],
        [-2.0 * g12 / 3.0, g22 / 3.0],
        [-g22, zero],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def beta_ls_core(g, dg, kappa_target):
    """Vectorized least-squares solve for beta; returns (beta, residual).

    residual is the invariant-tensor Frobenius norm of the remaining kappa
    mismatch, so it is exactly zero when the target class is compatible.
    """
    klc = kappa_of_gamma(lc_gamma(g, dg))
    rhs = kappa_target - klc
    A = _beta_design(g) * _ROW_W[:, None]
    r = rhs * _ROW_W
    At = np.swapaxes(A, -1, -2)
    normal = At @ A
    b_up = np.linalg.solve(normal, (At @ r[..., None]))[..., 0]
    gap = r - (A @ b_up[..., None])[..., 0]
    residual = np.sqrt(np.sum(gap * gap, axis=-1))
    beta = np.einsum("...ij,...j->...i", g, b_up)
    return beta, residual


@dataclass
class BetaSolution:
    beta: np.ndarray
    residual: float
    kappa_gap: np.ndarray


def solve_beta_least_squares(m: MetricJet, target: ProjectiveData) -> BetaSolution:
    """Solve the four invariant-matching equations for beta at one point."""
    if m.dg is None:
        raise GeometryError("least-squares solve needs metric first derivatives")
    beta, residual = beta_ls_core(m.g, m.dg, np.asarray(target.kappa, dtype=float))
    kgap = np.asarray(target.kappa, dtype=float) - kappa_of_gamma(
        lc_gamma(m.g, m.dg) + _weyl_part(m.g, beta)
    )
    return BetaSolution(beta=beta, residual=float(residual), kappa_gap=kgap)


def _weyl_part(g, b):
    from .connections import weyl_gamma

    return weyl_gamma(g, b)


# ----------------------------------------------------------------------
# representatives
# ----------------------------------------------------------------------
@dataclass
class WeylStructureChart:
    """A representative (metric field, 1-form field) on one chart."""

    metric: object  # ConformalMetric | MatrixMetric
    beta: OneFormField
    chart: Chart

    def connection_at(self, p):
        from .connections import weyl_connection

        m = self.metric.jet(self.chart, p, order=1)
        bj = self.beta.jet(self.chart, p, order=0)
        return weyl_connection(m, bj)


class _ShiftedOneForm(OneFormField):
    """beta + s * du for a jet-evaluable scalar u (used by the gauge moves)."""

    def __init__(self, base: OneFormField, u: ScalarField, sign=1.0):
        super().__init__(None, name=f"{base.name}+d({u.name})")
        self.base = base
        self.du = ExactOneForm(u, sign=sign)

    def __call__(self, x, y):
        raise GeometryError("shifted forms are evaluated through jets")

    def jet(self, chart, p, order=1):
        b0 = self.base.jet(chart, p, order=order)
        d0 = self.du.jet(chart, p, order=order)
        db = None
        if b0.db is not None and d0.db is not None:
            db = b0.db + d0.db
        return OneFormJet(b=b0.b + d0.b, db=db)


def rescale_pair(metric, beta: OneFormField, u: ScalarField):
    """Gauge move (g, beta) -> (e^{2u} g, beta + du); same Weyl connection."""
    if isinstance(metric, ConformalMetric):
        f0 = metric.factor
        new_factor = ScalarField(
            lambda x, y: f0(x, y) + u(x, y), name=f"{f0.name}+{u.name}"
        )
        new_metric = ConformalMetric(new_factor)
    elif isinstance(metric, MatrixMetric):
        fn = metric._fn

        def scaled(x, y):
            s = jm.exp(2.0 * u(x, y))
            g11, g12, g22 = fn(x, y)
            return (s * g11, s * g12, s * g22)

        new_metric = MatrixMetric(scaled, name=f"e^2u*{metric.name}")
    else:
        raise GeometryError("unsupported metric field")
    return new_metric, _ShiftedOneForm(beta, u)


def normalize_representative(w: WeylStructureChart, mode="det1") -> WeylStructureChart:
    """Move to a canonical representative without changing the Weyl connection.

    det1 rescales the metric to determinant one (shifting beta by the
    corresponding exact form).  conformal-factor re-expresses a pointwise
    isotropic metric in factor form and leaves the pair alone.
    """
    if mode == "det1":
        if isinstance(w.metric, ConformalMetric):
            f0 = w.metric.factor
            u = ScalarField(lambda x, y: -1.0 * f0(x, y), name=f"-{f0.name}")
        elif isinstance(w.metric, MatrixMetric):
            fn = w.metric._fn

            def u_fn(x, y):
                g11, g12, g22 = fn(x, y)
                return -0.25 * jm.log(g11 * g22 - g12 * g12)

            u = ScalarField(u_fn, name="det-gauge")
        else:
            raise GeometryError("unsupported metric field")
        m2, b2 = rescale_pair(w.metric, w.beta, u)
        return WeylStructureChart(metric=m2, beta=b2, chart=w.chart)
    if mode == "conformal-factor":
        if isinstance(w.metric, ConformalMetric):
            return WeylStructureChart(metric=w.metric, beta=w.beta, chart=w.chart)
        raise GeometryError(
            "conformal-factor mode needs a pointwise isotropic metric field"
        )
    raise GeometryError(f"unknown normalization mode {mode!r}")


# ----------------------------------------------------------------------
# grid verdicts
# ----------------------------------------------------------------------
@dataclass
class CompatibilityReport:
    chart: str
    grid_n: int
    tolerance: float
    max_residual: float
    compatible: bool
    residuals: np.ndarray  # (n*n,)
    beta_samples: np.ndarray  # (k, 4): x, y, b1, b2
    route: str = "kappa"
    meta: dict = dc_field(default_factory=dict)

    def to_json_dict(self):
        return {
            "schema": 1,
            "chart": self.chart,
            "grid_n": self.grid_n,
            "tolerance": self.tolerance,
            "route": self.route,
            "max_residual": self.max_residual,
            "compatible": bool(self.compatible),
            "residual_grid": [float(v) for v in self.residuals],
            "beta_samples": [[float(v) for v in row] for row in self.beta_samples],
            **self.meta,
        }

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True)
            fh.write("\n")


def compatibility_report(
    factor: ScalarField,
    proj_at,
    chart: Chart,
    n=33,
    margin=0.05,
    tol=DEFAULT_TOL,
    beta_samples=9,
) -> CompatibilityReport:
    """Sweep the isothermal kappa conditions over a chart grid.

    `proj_at(p) -> ConnectionCoeffs` supplies the representative coefficients
    of the projective class in this chart.
    """
    pts = chart_grid(chart, n=n, margin=margin)
    res = np.zeros(len(pts))
    betas = []
    keep = np.linspace(0, len(pts) - 1, beta_samples, dtype=int)
    for idx, p in enumerate(pts):
        fj = factor.jet(chart, p, order=1)
        proj = proj_at(p)
        r = kappa_residual(fj, proj)
        res[idx] = float(np.max(np.abs(r)))
        if idx in keep:
            k = kappa_of_gamma(proj.gamma)
            b = np.array([-k[3] + fj.grad[0], k[0] + fj.grad[1]])
            betas.append([p[0], p[1], b[0], b[1]])
    max_res = float(np.max(res))
    return CompatibilityReport(
        chart=chart.name,
        grid_n=n,
        tolerance=tol,
        max_residual=max_res,
        compatible=max_res <= tol,
        residuals=res,
        beta_samples=np.array(betas),
    )
