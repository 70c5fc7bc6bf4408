"""Forward-mode jets in two variables, plus the finite-difference referee.

Jet2 carries a truncated bivariate Taylor expansion (total degree <= order,
order <= 3).  Coefficients may have an arbitrary trailing shape, so the same
arithmetic evaluates a field at a single point or at a whole batch of points.
The finite-difference oracle below is deliberately independent of Jet2: it
only ever calls the field for plain values.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, JetOrderError

MAX_ORDER = 3

# (i, j, k, l) with i+j <= o, k+l <= o, i+j+k+l <= o, used by __mul__
_MUL_PAIRS: dict[int, tuple] = {}


def _mul_pairs(order):
    if order not in _MUL_PAIRS:
        pairs = []
        for i in range(order + 1):
            for j in range(order + 1 - i):
                for k in range(order + 1 - i - j):
                    for l in range(order + 1 - i - j - k):
                        pairs.append((i, j, k, l))
        _MUL_PAIRS[order] = tuple(pairs)
    return _MUL_PAIRS[order]


def _slots(order):
    return [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]


class Jet2:
    """Taylor coefficients c[i, j] of x^i y^j, truncated at total degree `order`.

    c[i, j] equals the (i, j) partial derivative divided by i! j!.
    """

    __slots__ = ("c", "order")

    # keep numpy from hijacking `ndarray <op> Jet2`
    __array_ufunc__ = None

    def __init__(self, c, order):
        self.c = c
        self.order = order

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    @staticmethod
    def variables(x, y, order):
        """Seed jets for the two chart coordinates at (x, y)."""
        if not 0 <= order <= MAX_ORDER:
            raise JetOrderError(f"jet order {order} unsupported (0..{MAX_ORDER})")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        tail = np.broadcast_shapes(x.shape, y.shape)
        cx = np.zeros((order + 1, order + 1) + tail)
        cy = np.zeros((order + 1, order + 1) + tail)
        cx[0, 0] = x
        cy[0, 0] = y
        if order >= 1:
            cx[1, 0] = 1.0
            cy[0, 1] = 1.0
        return Jet2(cx, order), Jet2(cy, order)

    @staticmethod
    def constant(value, order, tail=()):
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1, order + 1) + np.broadcast_shapes(value.shape, tail))
        c[0, 0] = value
        return Jet2(c, order)

    def _lift(self, other):
        if isinstance(other, Jet2):
            if other.order != self.order:
                raise JetOrderError("mixed jet orders")
            return other
        return Jet2.constant(other, self.order, tail=self.c.shape[2:])

    # ------------------------------------------------------------------
    # derivative access (plain arrays)
    # ------------------------------------------------------------------
    @property
    def value(self):
        return self.c[0, 0]

    @property
    def grad(self):
        if self.order < 1:
            raise JetOrderError("gradient needs order >= 1")
        return np.stack([self.c[1, 0], self.c[0, 1]], axis=-1)

    @property
    def hess(self):
        if self.order < 2:
            raise JetOrderError("hessian needs order >= 2")
        hxx = 2.0 * self.c[2, 0]
        hxy = self.c[1, 1]
        hyy = 2.0 * self.c[0, 2]
        return np.stack(
            [np.stack([hxx, hxy], axis=-1), np.stack([hxy, hyy], axis=-1)], axis=-2
        )

    @property
    def third(self):
        if self.order < 3:
            raise JetOrderError("third derivatives need order >= 3")
        d = np.zeros(self.c.shape[2:] + (2, 2, 2))
        vals = {
            (0, 0, 0): 6.0 * self.c[3, 0],
            (0, 0, 1): 2.0 * self.c[2, 1],
            (0, 1, 1): 2.0 * self.c[1, 2],
            (1, 1, 1): 6.0 * self.c[0, 3],
        }
        for (i, j, k), v in vals.items():
            for perm in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                d[(...,) + perm] = v
        return d

    def truncate(self, order):
        """Drop coefficients above a (lower or equal) total degree."""
        if order > self.order:
            raise JetOrderError("cannot raise a jet's order")
        if order == self.order:
            return self
        return Jet2(self.c[: order + 1, : order + 1].copy(), order)

    def deriv(self, axis):
        """Jet of the partial derivative along `axis`, one order lower."""
        if self.order < 1:
            raise JetOrderError("cannot differentiate an order-0 jet")
        o = self.order
        out = np.zeros((o, o) + self.c.shape[2:])
        for i in range(o):
            for j in range(o - i):
                if axis == 0:
                    out[i, j] = (i + 1) * self.c[i + 1, j]
                else:
                    out[i, j] = (j + 1) * self.c[i, j + 1]
        return Jet2(out, o - 1)

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------
    def __neg__(self):
        return Jet2(-self.c, self.order)

    def __add__(self, other):
        other = self._lift(other)
        return Jet2(self.c + other.c, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        return Jet2(self.c - other.c, self.order)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        other = self._lift(other)
        o = self.order
        a, b = self.c, other.c
        tail = np.broadcast_shapes(a.shape[2:], b.shape[2:])
        out = np.zeros((o + 1, o + 1) + tail)
        for i, j, k, l in _mul_pairs(o):
            out[i + k, j + l] += a[i, j] * b[k, l]
        return Jet2(out, o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        return self * other._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise TypeError("jet powers must be non-negative integers")
        out = Jet2.constant(1.0, self.order, tail=self.c.shape[2:])
        for _ in range(n):
            out = out * self
        return out

    # ------------------------------------------------------------------
    # analytic functions via Taylor composition around the value
    # ------------------------------------------------------------------
    def _compose(self, ders):
        """Sum ders[k] * (self - value)^k / k! truncated at the jet order."""
        o = self.order
        u = self.c.copy()
        u[0, 0] = np.zeros_like(u[0, 0])
        ujet = Jet2(u, o)
        out = Jet2.constant(ders[0], o, tail=self.c.shape[2:])
        term = Jet2.constant(1.0, o, tail=self.c.shape[2:])
        for k in range(1, min(o, len(ders) - 1) + 1):
            term = term * ujet
            out = out + term * (np.asarray(ders[k]) / math.factorial(k))
        return out

    def _reciprocal(self):
        a = self.value
        return self._compose([1.0 / a, -1.0 / a**2, 2.0 / a**3, -6.0 / a**4])

    def sqrt(self):
        s = np.sqrt(self.value)
        return self._compose([s, 0.5 / s, -0.25 / s**3, 0.375 / s**5])

    def exp(self):
        e = np.exp(self.value)
        return self._compose([e, e, e, e])

    def log(self):
        a = self.value
        return self._compose([np.log(a), 1.0 / a, -1.0 / a**2, 2.0 / a**3])

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self._compose([s, c, -s, -c])

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self._compose([c, -s, -c, s])

    def __repr__(self):
        return f"Jet2(order={self.order}, value={self.value!r})"


# ----------------------------------------------------------------------
# numpy-or-jet math, so field formulas stay agnostic
# ----------------------------------------------------------------------
def sqrt(v):
    return v.sqrt() if isinstance(v, Jet2) else np.sqrt(v)


def exp(v):
    return v.exp() if isinstance(v, Jet2) else np.exp(v)


def log(v):
    return v.log() if isinstance(v, Jet2) else np.log(v)


def sin(v):
    return v.sin() if isinstance(v, Jet2) else np.sin(v)


def cos(v):
    return v.cos() if isinstance(v, Jet2) else np.cos(v)


# ----------------------------------------------------------------------
# finite-difference referee
# ----------------------------------------------------------------------
# centered stencils, second order accurate; offsets paired with weights
_STENCILS = {
    0: ((0,), (1.0,), 0),
    1: ((-1, 1), (-0.5, 0.5), 1),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0), 2),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5), 3),
}


def _fd_once(fn, p, index, h):
    ox, wx, px = _STENCILS[index[0]]
    oy, wy, py = _STENCILS[index[1]]
    acc = 0.0
    for dx, cx in zip(ox, wx):
        for dy, cy in zip(oy, wy):
            acc += cx * cy * fn(p[0] + dx * h, p[1] + dy * h)
    return acc / h ** (px + py)


def fd_oracle(fn, chart, p, index, h=1e-3, richardson=True):
    """Central-difference estimate of a mixed partial of a scalar function.

    `index` is the multi-index (i, j) meaning d^i/dx^i d^j/dy^j, with
    i + j <= 3.  One Richardson level combines the h and h/2 stencils, so the
    truncation error is O(h^4).  This is the acceptance referee for the jet
    path; it never looks at Jet2.
    """
    index = tuple(int(k) for k in index)
    if len(index) != 2 or min(index) < 0 or sum(index) > MAX_ORDER:
        raise JetOrderError(f"unsupported multi-index {index}")
    p = np.asarray(p, dtype=float)
    radius = h * max(max(abs(o) for o in _STENCILS[k][0]) for k in index)
    if not bool(np.all(chart.contains(p, margin=radius))):
        raise DomainError(f"stencil of radius {radius:g} leaves chart {chart.name}")
    coarse = _fd_once(fn, p, index, h)
    if not richardson:
        return coarse
    fine = _fd_once(fn, p, index, h / 2.0)
    return (4.0 * fine - coarse) / 3.0
