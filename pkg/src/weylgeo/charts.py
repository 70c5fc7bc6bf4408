"""Fixed chart atlas for the sphere plus planar windows.

The sphere is covered by two stereographic charts and one gnomonic chart:

* ``north-stereographic`` is centered at (0,0,1) and omits the south pole,
* ``south-stereographic`` is centered at (0,0,-1), omits the north pole and
  carries a y-flip so that every chart is orientation preserving for the
  outward orientation,
* ``gnomonic`` is centered at (1,0,0), covers the open hemisphere X > 0 and
  sends great circles to straight lines.

The north-to-south transition is (x, y) |-> (x, -y) / (x^2 + y^2); it is the
fixed point set of the unit circle and all other transitions are composed
through the R^3 embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError

_EPS = 1e-12


@dataclass(frozen=True)
class Chart:
    name: str
    kind: str  # "sphere" | "plane"
    extent: float

    # ------------------------------------------------------------------
    def contains(self, p, margin=0.0):
        """Sup-norm window test; returns bool for a point, mask for a batch."""
        p = np.asarray(p, dtype=float)
        inside = np.max(np.abs(p), axis=-1) <= self.extent - margin
        return bool(inside) if inside.ndim == 0 else inside

    # ------------------------------------------------------------------
    def embed(self, p):
        """Chart coordinates -> unit vectors in R^3 (sphere charts only)."""
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        if self.name == "north-stereographic":
            d = 1.0 + x * x + y * y
            return np.stack([2.0 * x / d, 2.0 * y / d, (2.0 - d) / d], axis=-1)
        if self.name == "south-stereographic":
            d = 1.0 + x * x + y * y
            return np.stack([2.0 * x / d, -2.0 * y / d, (d - 2.0) / d], axis=-1)
        if self.name == "gnomonic":
            n = np.sqrt(1.0 + x * x + y * y)
            return np.stack([1.0 / n, x / n, y / n], axis=-1)
        raise GeometryError(f"chart {self.name} has no sphere embedding")

    def embed_jacobian(self, p):
        """d(embed), shape (..., 3, 2)."""
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        if self.name in ("north-stereographic", "south-stereographic"):
            d = 1.0 + x * x + y * y
            d2 = d * d
            jx = np.stack([2.0 / d - 4.0 * x * x / d2, -4.0 * x * y / d2, -4.0 * x / d2], axis=-1)
            jy = np.stack([-4.0 * x * y / d2, 2.0 / d - 4.0 * y * y / d2, -4.0 * y / d2], axis=-1)
            J = np.stack([jx, jy], axis=-1)
            if self.name == "south-stereographic":
                J = J * np.array([1.0, -1.0, -1.0])[:, None]
            return J
        if self.name == "gnomonic":
            n = np.sqrt(1.0 + x * x + y * y)
            n3 = n**3
            jx = np.stack([-x / n3, 1.0 / n - x * x / n3, -x * y / n3], axis=-1)
            jy = np.stack([-y / n3, -x * y / n3, 1.0 / n - y * y / n3], axis=-1)
            return np.stack([jx, jy], axis=-1)
        raise GeometryError(f"chart {self.name} has no sphere embedding")

    # ------------------------------------------------------------------
    def unembed(self, u):
        """Unit vectors -> chart coordinates; raises near the excluded locus."""
        u = np.asarray(u, dtype=float)
        X, Y, Z = u[..., 0], u[..., 1], u[..., 2]
        if self.name == "north-stereographic":
            d = 1.0 + Z
            self._guard(d)
            return np.stack([X / d, Y / d], axis=-1)
        if self.name == "south-stereographic":
            d = 1.0 - Z
            self._guard(d)
            return np.stack([X / d, -Y / d], axis=-1)
        if self.name == "gnomonic":
            self._guard(X)
            return np.stack([Y / X, Z / X], axis=-1)
        raise GeometryError(f"chart {self.name} has no sphere embedding")

    def unembed_jacobian(self, u):
        """d(unembed), shape (..., 2, 3); valid on tangent vectors of S^2."""
        u = np.asarray(u, dtype=float)
        X, Y, Z = u[..., 0], u[..., 1], u[..., 2]
        zero = np.zeros_like(X)
        if self.name == "north-stereographic":
            d = 1.0 + Z
            self._guard(d)
            r0 = np.stack([1.0 / d, zero, -X / d**2], axis=-1)
            r1 = np.stack([zero, 1.0 / d, -Y / d**2], axis=-1)
            return np.stack([r0, r1], axis=-2)
        if self.name == "south-stereographic":
            d = 1.0 - Z
            self._guard(d)
            r0 = np.stack([1.0 / d, zero, X / d**2], axis=-1)
            r1 = np.stack([zero, -1.0 / d, -Y / d**2], axis=-1)
            return np.stack([r0, r1], axis=-2)
        if self.name == "gnomonic":
            self._guard(X)
            r0 = np.stack([-Y / X**2, 1.0 / X, zero], axis=-1)
            r1 = np.stack([-Z / X**2, zero, 1.0 / X], axis=-1)
            return np.stack([r0, r1], axis=-2)
        raise GeometryError(f"chart {self.name} has no sphere embedding")

    @staticmethod
    def _guard(denom):
        if np.any(np.abs(denom) < _EPS):
            raise DomainError("point sits on the chart's excluded locus")


NORTH = Chart("north-stereographic", "sphere", 1.6)
SOUTH = Chart("south-stereographic", "sphere", 1.6)
GNOMONIC = Chart("gnomonic", "sphere", 1.5)

SPHERE_ATLAS = (NORTH, SOUTH)


def planar(extent=1.0):
    return Chart("planar", "plane", float(extent))


PLANAR = planar()


def get_chart(name, extent=None):
    table = {c.name: c for c in (NORTH, SOUTH, GNOMONIC)}
    if name in table:
        return table[name]
    if name == "planar":
        return planar(1.0 if extent is None else extent)
    raise GeometryError(f"unknown chart {name!r}")


def other_stereographic(chart):
    if chart.name == NORTH.name:
        return SOUTH
    if chart.name == SOUTH.name:
        return NORTH
    raise GeometryError("chart switching is defined for the stereographic pair")


def transition(src: Chart, dst: Chart, p):
    """Map a point between charts; returns (q, J) with J the 2x2 Jacobian.

    Composed through the sphere embedding, which reproduces the pinned
    north->south formula (x, y) |-> (x, -y)/(x^2+y^2) and makes every pair of
    sphere charts mutually consistent.
    """
    p = np.asarray(p, dtype=float)
    if src.name == dst.name:
        eye = np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2)).copy()
        return p.copy(), eye
    if src.kind != "sphere" or dst.kind != "sphere":
        raise DomainError("transitions exist only within the sphere atlas")
    u = src.embed(p)
    q = dst.unembed(u)
    J = dst.unembed_jacobian(u) @ src.embed_jacobian(p)
    return q, J


def chart_grid(chart: Chart, n=33, margin=0.05):
    """Uniform (n*n, 2) sample grid inside the chart window minus a margin."""
    if n < 3:
        raise GeometryError("grid size must be at least 3")
    half = chart.extent - margin
    t = np.linspace(-half, half, n)
    gx, gy = np.meshgrid(t, t, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=-1)
