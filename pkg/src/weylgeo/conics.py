"""Plane conics without real points and the sphere data they induce.

A conic is a complex symmetric 3x3 matrix Q = A + iB up to scale, stored at
unit Frobenius norm.  An admissible conic (smooth, no real points) meets the
real line { z : u . z = 0 } over every unit vector u in exactly two complex
points, one per hemisphere; picking the root on the +u side yields a section
whose decoded conformal class, together with a least-squares 1-form solve
against the straight-line structure of the gnomonic chart, produces a det-1
metric and 1-form field on the sphere charts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .charts import Chart, GNOMONIC, NORTH, SOUTH, SPHERE_ATLAS
from .compat import beta_ls_core
from .connections import conformal_lc_coeffs, kappa_of_gamma, lc_gamma, weyl_gamma
from .errors import (
    DegenerateConicError,
    GeometryError,
    InadmissibleConicError,
    RealPointInputError,
)

_EX = np.array([1.0, 0.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])

REAL_POINT_TOL = 1e-12
SMOOTH_DET_TOL = 1e-9


def _cross(a, b):
    # np.cross has high overhead on small batches; hot path uses this
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=np.result_type(a, b))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def _dot(a, b):
    return np.sum(a * b, axis=-1)


# ----------------------------------------------------------------------
# the conic itself
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Conic:
    A: np.ndarray
    B: np.ndarray

    @classmethod
    def from_matrices(cls, A, B):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.shape != (3, 3) or B.shape != (3, 3):
            raise GeometryError("conic matrices must be 3x3")
        if np.max(np.abs(A - A.T)) > 1e-12 or np.max(np.abs(B - B.T)) > 1e-12:
            raise GeometryError("conic matrices must be symmetric")
        A = 0.5 * (A + A.T)
        B = 0.5 * (B + B.T)
        scale = np.sqrt(np.sum(A * A) + np.sum(B * B))
        if scale < 1e-300:
            raise DegenerateConicError("zero conic")
        return cls(A=A / scale, B=B / scale)

    @classmethod
    def from_complex(cls, Q):
        Q = np.asarray(Q, dtype=complex)
        return cls.from_matrices(Q.real, Q.imag)

    @classmethod
    def from_json_dict(cls, cfg):
        try:
            return cls.from_matrices(cfg["A"], cfg["B"])
        except KeyError as exc:
            raise GeometryError(f"conic JSON needs key {exc}") from exc

    @property
    def Q(self):
        return self.A + 1j * self.B

    @property
    def det(self):
        return complex(np.linalg.det(self.Q))

    @property
    def smooth(self):
        return abs(self.det) > SMOOTH_DET_TOL

    def to_json_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist()}


# ----------------------------------------------------------------------
# projective points
# ----------------------------------------------------------------------
def normalize_proj(z):
    """Scale to |z| = 1 with the first non-negligible component made real >= 0."""
    z = np.asarray(z, dtype=complex)
    nrm = np.linalg.norm(z)
    if nrm < 1e-300:
        raise GeometryError("zero vector is not a projective point")
    z = z / nrm
    mags = np.abs(z)
    lead = int(np.argmax(mags > 1e-12 * mags.max()))
    phase = z[lead] / abs(z[lead])
    return z / phase


@dataclass(frozen=True)
class ProjPoint:
    z: np.ndarray

    @classmethod
    def of(cls, z):
        return cls(z=normalize_proj(z))

    def close_to(self, other, tol=1e-9):
        other = other if isinstance(other, ProjPoint) else ProjPoint.of(other)
        return abs(abs(np.vdot(self.z, other.z)) - 1.0) <= tol


def rho(z):
    """Base point of a projective point: normalized Re(z) x Im(z)."""
    z = z.z if isinstance(z, ProjPoint) else np.asarray(z, dtype=complex)
    cross = np.cross(z.real, z.imag)
    nrm = np.linalg.norm(cross)
    if nrm < 1e-12 * max(np.linalg.norm(z) ** 2, 1e-300):
        raise RealPointInputError("real projective point has no base point")
    return cross / nrm


def tau(g):
    """Frame matrix (columns g0, g1, g2, det 1) -> the projective point
    (g0 x g1) + i (g0 x g2).  Its base point is g0/|g0|."""
    g = np.asarray(g, dtype=float)
    if abs(np.linalg.det(g) - 1.0) > 1e-10:
        raise GeometryError("frame matrix must have determinant one")
    z = np.cross(g[:, 0], g[:, 1]) + 1j * np.cross(g[:, 0], g[:, 2])
    return ProjPoint.of(z)


# ----------------------------------------------------------------------
# fibers over the sphere
# ----------------------------------------------------------------------
def sphere_basis(u):
    """Deterministic orthonormal basis of u-perp; pole-safe branch rule."""
    u = np.asarray(u, dtype=float)
    use_z = np.abs(u[..., 2]) < 0.9
    seed = np.where(use_z[..., None], _EZ, _EX)
    a1 = _cross(seed, u)
    a1 = a1 / np.sqrt(_dot(a1, a1))[..., None]
    a2 = _cross(u, a1)
    return a1, a2


def _fiber_batch(Q, u, a1, a2):
    """Roots of the restricted quadratic, selected on the +u hemisphere."""
    Qa1 = a1 @ Q.T
    Qa2 = a2 @ Q.T
    css = _dot(a1, Qa1)
    cst = _dot(a1, Qa2)
    ctt = _dot(a2, Qa2)
    # no real points => css never vanishes, so t = 1 is a safe normalization
    disc = cst * cst - css * ctt
    if np.min(np.abs(disc)) < 1e-14:
        raise DegenerateConicError("double fiber root: conic is not smooth here")
    # keep the square root away from its branch cut so roots vary smoothly
    flip = disc.real < 0.0
    sq = np.where(flip, 1j * np.sqrt(-np.where(flip, disc, -1.0)), np.sqrt(np.where(flip, 1.0, disc)))
    zp = ((-cst + sq) / css)[..., None] * a1 + a2
    zm = ((-cst - sq) / css)[..., None] * a1 + a2
    side_p = _dot(_cross(zp.real, zp.imag), u)
    side_m = _dot(_cross(zm.real, zm.imag), u)
    if np.any(side_p * side_m >= 0.0):
        raise InadmissibleConicError("fiber roots do not separate the hemispheres")
    return np.where((side_p > 0.0)[..., None], zp, zm)


def fiber_section(conic: Conic, u) -> ProjPoint:
    """The fiber point over u on the +u side; |z^T Q z| and |u . z| vanish."""
    _require_admissible(conic)
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    a1, a2 = sphere_basis(u)
    z = _fiber_batch(conic.Q, u, a1, a2)
    return ProjPoint.of(z)


def _decode_batch(z, u, a1, a2):
    """det-1 matrix of the inner product declaring {u x Re z, u x Im z}
    orthonormal, in the (a1, a2) basis."""
    v1 = _cross(u, z.real)
    v2 = _cross(u, z.imag)
    m11 = _dot(a1, v1)
    m12 = _dot(a1, v2)
    m21 = _dot(a2, v1)
    m22 = _dot(a2, v2)
    s11 = m11 * m11 + m12 * m12
    s12 = m11 * m21 + m12 * m22
    s22 = m21 * m21 + m22 * m22
    det = s11 * s22 - s12 * s12
    if np.any(det <= 1e-24):
        raise RealPointInputError("degenerate frame: point too close to real locus")
    root = np.sqrt(det)
    out = np.empty(np.shape(s11) + (2, 2))
    out[..., 0, 0] = s22 / root
    out[..., 0, 1] = out[..., 1, 0] = -s12 / root
    out[..., 1, 1] = s11 / root
    return out


@dataclass
class DecodedClass:
    u: np.ndarray
    G: np.ndarray  # det-1 matrix in the deterministic basis of u-perp
    basis: np.ndarray  # (2, 3) rows a1, a2


def decode_conformal(z) -> DecodedClass:
    """Conformal inner product on u-perp carried by a projective point."""
    zv = z.z if isinstance(z, ProjPoint) else np.asarray(z, dtype=complex)
    u = rho(zv)
    a1, a2 = sphere_basis(u)
    G = _decode_batch(zv, u, a1, a2)
    return DecodedClass(u=u, G=G, basis=np.stack([a1, a2]))


# ----------------------------------------------------------------------
# real-point decision
# ----------------------------------------------------------------------
def _sphere_grid(n_theta=20, n_phi=40):
    th = np.linspace(0.0, np.pi, n_theta + 2)[1:-1]
    ph = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    T, P = np.meshgrid(th, ph, indexing="ij")
    return np.stack(
        [np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1
    ).reshape(-1, 3)


def _F_and_grad(A, B, x):
    qa = np.einsum("...i,ij,...j->...", x, A, x)
    qb = np.einsum("...i,ij,...j->...", x, B, x)
    F = qa * qa + qb * qb
    grad = 4.0 * (qa[..., None] * (x @ A.T) + qb[..., None] * (x @ B.T))
    return F, grad


@dataclass
class RealPointScan:
    min_value: float
    argmin: np.ndarray
    real_points: bool
    tolerance: float = REAL_POINT_TOL

    def to_json_dict(self):
        return {
            "minF": self.min_value,
            "argmin": [float(v) for v in self.argmin],
            "real_points": bool(self.real_points),
            "tolerance": self.tolerance,
        }


def real_point_scan(conic: Conic, n_theta=20, n_phi=40, iters=200, polish=6) -> RealPointScan:
    """Multi-start minimization of F = (x'Ax)^2 + (x'Bx)^2 on the unit sphere.

    Projected gradient descent is run from every node of an n_theta x n_phi
    grid simultaneously, then the best survivors are polished with BFGS on the
    scale-invariant extension of F.  min F < 1e-12 declares a real point.
    """
    if not conic.smooth:
        raise DegenerateConicError("real-point scan needs a smooth conic")
    A, B = conic.A, conic.B
    x = _sphere_grid(n_theta, n_phi)
    step = np.full(len(x), 0.1)
    F, grad = _F_and_grad(A, B, x)
    for _ in range(iters):
        rgrad = grad - np.einsum("...i,...i->...", grad, x)[..., None] * x
        cand = x - step[..., None] * rgrad
        cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
        Fc, gc = _F_and_grad(A, B, cand)
        better = Fc < F
        x = np.where(better[..., None], cand, x)
        grad = np.where(better[..., None], gc, grad)
        F = np.where(better, Fc, F)
        step = np.where(better, step * 1.2, step * 0.5)
    order = np.argsort(F)[:polish]

    def f_free(v):
        w = v / np.linalg.norm(v)
        val, _ = _F_and_grad(A, B, w[None, :])
        return float(val[0])

    best_val = float(F[order[0]])
    best_arg = x[order[0]]
    for idx in order:
        res = optimize.minimize(f_free, x[idx], method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-18, "maxiter": 400})
        v = res.x / np.linalg.norm(res.x)
        val = float(_F_and_grad(A, B, v[None, :])[0][0])
        if val < best_val:
            best_val, best_arg = val, v
    return RealPointScan(
        min_value=best_val,
        argmin=best_arg,
        real_points=best_val < REAL_POINT_TOL,
    )


def has_real_points(conic: Conic) -> bool:
    return real_point_scan(conic).real_points


def _require_admissible(conic: Conic):
    if not conic.smooth:
        raise DegenerateConicError("conic determinant below smoothness threshold")
    scan = _ADMISSIBLE_CACHE.get(id(conic))
    if scan is None:
        scan = real_point_scan(conic)
        _ADMISSIBLE_CACHE[id(conic)] = scan
    if scan.real_points:
        raise InadmissibleConicError(
            f"conic has real points (minF = {scan.min_value:.3e})"
        )


_ADMISSIBLE_CACHE: dict[int, RealPointScan] = {}


# ----------------------------------------------------------------------
# induced metric and 1-form fields
# ----------------------------------------------------------------------
def flat_target_kappa(chart: Chart, pts):
    """kappa of the straight-line structure's representative in this chart."""
    pts = np.asarray(pts, dtype=float)
    if chart.name == GNOMONIC.name:
        return np.zeros(pts.shape[:-1] + (4,))
    if chart.name in (NORTH.name, SOUTH.name):
        x, y = pts[..., 0], pts[..., 1]
        d = 1.0 + x * x + y * y
        fx = -2.0 * x / d
        fy = -2.0 * y / d
        return np.stack([-fy, fx / 3.0, -fy / 3.0, fx], axis=-1)
    raise GeometryError(f"no straight-line representative on chart {chart.name}")


def flat_target_gamma(chart: Chart, pts):
    pts = np.asarray(pts, dtype=float)
    if chart.name == GNOMONIC.name:
        return np.zeros(pts.shape[:-1] + (2, 2, 2))
    if chart.name in (NORTH.name, SOUTH.name):
        x, y = pts[..., 0], pts[..., 1]
        d = 1.0 + x * x + y * y
        return conformal_lc_coeffs(-2.0 * x / d, -2.0 * y / d)
    raise GeometryError(f"no straight-line representative on chart {chart.name}")


# 13-point stencil: value, 4th-order first derivatives, second derivatives
_OFFSETS = np.array(
    [
        (0, 0),
        (1, 0), (-1, 0), (2, 0), (-2, 0),
        (0, 1), (0, -1), (0, 2), (0, -2),
        (1, 1), (1, -1), (-1, 1), (-1, -1),
    ],
    dtype=float,
)


@dataclass
class WeylSample:
    """Pointwise chart data of a Weyl representative (batch leading axis)."""

    G: np.ndarray      # (..., 2, 2) det-1 metric
    dG: np.ndarray     # (..., 2, 2, 2)
    d2G: np.ndarray    # (..., 2, 2, 2, 2)
    beta: np.ndarray   # (..., 2)
    dbeta: np.ndarray  # (..., 2, 2) dbeta[m, i]
    residual: np.ndarray  # (...,) least-squares residual where applicable


class ConicWeylData:
    """Evaluates the conic-induced det-1 metric and compatible 1-form.

    Derivatives are produced by Richardson-grade central differences of the
    point pipeline; the fd step is small enough that every consumer tolerance
    has two orders of margin.
    """

    atlas = SPHERE_ATLAS

    def __init__(self, conic: Conic, fd_step=1e-3, check=True):
        self.conic = conic
        self.h = float(fd_step)
        if check:
            _require_admissible(conic)

    # -- raw pipeline ---------------------------------------------------
    def metric(self, chart: Chart, pts):
        """det-1 metric in chart coordinates, vectorized."""
        pts = np.asarray(pts, dtype=float)
        u = chart.embed(pts)
        J = chart.embed_jacobian(pts)
        a1, a2 = sphere_basis(u)
        z = _fiber_batch(self.conic.Q, u, a1, a2)
        G2 = _decode_batch(z, u, a1, a2)
        C = np.stack([_dot(a1[..., None, :].swapaxes(-1, -1), J.swapaxes(-1, -2)),
                      _dot(a2[..., None, :].swapaxes(-1, -1), J.swapaxes(-1, -2))], axis=-2)
        g = np.einsum("...ki,...kl,...lj->...ij", C, G2, C)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        return g / np.sqrt(det)[..., None, None]

    # -- derivative assembly --------------------------------------------
    def _stencil(self, chart, pts):
        pts = np.asarray(pts, dtype=float)
        nodes = pts[..., None, :] + self.h * _OFFSETS
        return self.metric(chart, nodes)

    def sample(self, chart: Chart, pts) -> WeylSample:
        """Metric and 1-form with the derivatives the coframe algebra needs."""
        pts = np.asarray(pts, dtype=float)
        h = self.h
        gs = self._stencil(chart, pts)
        n = gs[..., 0, :, :]
        G = n
        dG = np.stack(
            [
                (-gs[..., 3, :, :] + 8 * gs[..., 1, :, :] - 8 * gs[..., 2, :, :] + gs[..., 4, :, :]) / (12 * h),
                (-gs[..., 7, :, :] + 8 * gs[..., 5, :, :] - 8 * gs[..., 6, :, :] + gs[..., 8, :, :]) / (12 * h),
            ],
            axis=-3,
        )
        dxx = (-gs[..., 3, :, :] + 16 * gs[..., 1, :, :] - 30 * n + 16 * gs[..., 2, :, :] - gs[..., 4, :, :]) / (12 * h * h)
        dyy = (-gs[..., 7, :, :] + 16 * gs[..., 5, :, :] - 30 * n + 16 * gs[..., 6, :, :] - gs[..., 8, :, :]) / (12 * h * h)
        dxy = (gs[..., 9, :, :] - gs[..., 10, :, :] - gs[..., 11, :, :] + gs[..., 12, :, :]) / (4 * h * h)
        d2G = np.stack(
            [np.stack([dxx, dxy], axis=-3), np.stack([dxy, dyy], axis=-3)], axis=-4
        )
        # beta at the center (4th-order dG) and at the four axis nodes
        # (2nd-order dG assembled from the same stencil), for dbeta
        beta0, residual = beta_ls_core(G, dG, flat_target_kappa(chart, pts))
        node_pts = pts[..., None, :] + h * _OFFSETS
        sides = {
            1: ((gs[..., 3, :, :] - n) / (2 * h), (gs[..., 9, :, :] - gs[..., 10, :, :]) / (2 * h)),
            2: ((n - gs[..., 4, :, :]) / (2 * h), (gs[..., 11, :, :] - gs[..., 12, :, :]) / (2 * h)),
            5: ((gs[..., 9, :, :] - gs[..., 11, :, :]) / (2 * h), (gs[..., 7, :, :] - n) / (2 * h)),
            6: ((gs[..., 10, :, :] - gs[..., 12, :, :]) / (2 * h), (n - gs[..., 8, :, :]) / (2 * h)),
        }
        beta_side = {}
        for node, (gx, gy) in sides.items():
            dGn = np.stack([gx, gy], axis=-3)
            beta_side[node], _ = beta_ls_core(
                gs[..., node, :, :], dGn, flat_target_kappa(chart, node_pts[..., node, :])
            )
        dbeta = np.stack(
            [
                (beta_side[1] - beta_side[2]) / (2 * h),
                (beta_side[5] - beta_side[6]) / (2 * h),
            ],
            axis=-2,
        )
        return WeylSample(G=G, dG=dG, d2G=d2G, beta=beta0, dbeta=dbeta, residual=residual)

    # -- connection for geodesics ----------------------------------------
    def connection(self, chart: Chart, pts):
        """Weyl connection coefficients gamma[..., i, k, l] at chart points."""
        pts = np.asarray(pts, dtype=float)
        h = self.h
        nodes = pts[..., None, :] + h * _OFFSETS[:9]
        gs = self.metric(chart, nodes)
        G = gs[..., 0, :, :]
        dG = np.stack(
            [
                (-gs[..., 3, :, :] + 8 * gs[..., 1, :, :] - 8 * gs[..., 2, :, :] + gs[..., 4, :, :]) / (12 * h),
                (-gs[..., 7, :, :] + 8 * gs[..., 5, :, :] - 8 * gs[..., 6, :, :] + gs[..., 8, :, :]) / (12 * h),
            ],
            axis=-3,
        )
        beta, _ = beta_ls_core(G, dG, flat_target_kappa(chart, pts))
        return lc_gamma(G, dG) + weyl_gamma(G, beta)


@dataclass
class ConicWeylStructure:
    metric: np.ndarray
    beta: np.ndarray
    residual: float
    chart: str
    point: np.ndarray


def conic_weyl_structure(conic: Conic, chart: Chart, p, data: ConicWeylData | None = None) -> ConicWeylStructure:
    """det-1 metric and compatible 1-form at one chart point."""
    if data is None:
        data = ConicWeylData(conic)
    p = np.asarray(p, dtype=float)
    s = data.sample(chart, p[None, :])
    residual = float(s.residual[0])
    if residual > 1e-7:
        raise GeometryError(
            f"least-squares residual {residual:.3e} above 1e-7; "
            "conic is near-degenerate or implementation is inconsistent"
        )
    return ConicWeylStructure(
        metric=s.G[0], beta=s.beta[0], residual=residual, chart=chart.name, point=p
    )
