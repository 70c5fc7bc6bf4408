"""Geodesic integration for arbitrary connection fields on the chart atlas.

Classical fourth-order Runge-Kutta on (x, v) with ddot x^i = -gamma^i_kl
xdot^k xdot^l.  On the sphere the two stereographic charts are used and the
state hops charts whenever |x| passes the switch radius, transporting the
velocity with the transition Jacobian.  Paths carry embedded positions so
closure and planarity can be measured in R^3.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .charts import Chart, PLANAR, SPHERE_ATLAS, other_stereographic, transition
from .errors import DomainError, GeometryError

SWITCH_RADIUS = 1.5
DEFAULT_STEP = 1e-3
DEFAULT_S_MAX = 50.0
CLOSURE_TOL = 1e-4

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(fn, lo, hi, tol=1e-13, max_iter=90):
    """Golden-section minimum of a unimodal function.

    Return-distance functions have a V-shaped kink at the minimum, which
    defeats parabolic refinement and the sqrt(eps) floor of library scalar
    minimizers; plain golden section reaches machine-level brackets.
    """
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


# ----------------------------------------------------------------------
# connection fields
# ----------------------------------------------------------------------
class ConstantConnection:
    """Coefficients independent of position, on a single planar chart."""

    def __init__(self, gamma, chart: Chart = PLANAR):
        gamma = np.asarray(gamma, dtype=float)
        self.gamma_const = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
        self.atlas = (chart,)

    def gamma(self, chart, pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(self.gamma_const, pts.shape[:-1] + (2, 2, 2)).copy()


class CallableConnection:
    """Wrap a vectorized coefficient function gamma(chart, pts)."""

    def __init__(self, fn, atlas=SPHERE_ATLAS):
        self._fn = fn
        self.atlas = tuple(atlas)

    def gamma(self, chart, pts):
        return self._fn(chart, np.asarray(pts, dtype=float))


class ConformalLCConnection:
    """Levi-Civita connection of e^{2f} * identity, from the factor jets."""

    def __init__(self, factor, atlas=SPHERE_ATLAS):
        from .connections import conformal_lc_coeffs

        self.factor = factor
        self.atlas = tuple(atlas)
        self._coeffs = conformal_lc_coeffs

    def gamma(self, chart, pts):
        pts = np.asarray(pts, dtype=float)
        fj = self.factor.jet(chart, pts, order=1)
        return self._coeffs(fj.grad[..., 0], fj.grad[..., 1])


class WeylDataConnection:
    """Connection of a Weyl sampler (for conic-induced structures)."""

    def __init__(self, data):
        self.data = data
        self.atlas = tuple(data.atlas)

    def gamma(self, chart, pts):
        return self.data.connection(chart, pts)


# ----------------------------------------------------------------------
# states and paths
# ----------------------------------------------------------------------
@dataclass
class GeodesicState:
    chart: Chart
    x: np.ndarray
    v: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(2)
        self.v = np.asarray(self.v, dtype=float).reshape(2)
        if np.linalg.norm(self.v) == 0.0:
            raise GeometryError("geodesic velocity must be nonzero")


@dataclass
class PathSample:
    s: np.ndarray
    chart_names: list
    x: np.ndarray
    v: np.ndarray
    r3: np.ndarray | None = None

    def __len__(self):
        return len(self.s)

    def direction3(self, conn=None):
        """Unit velocity in R^3 (sphere paths only)."""
        if self.r3 is None:
            raise GeometryError("no sphere embedding on this path")
        charts = {}
        d = np.zeros_like(self.r3)
        for i, name in enumerate(self.chart_names):
            chart = charts.get(name)
            if chart is None:
                from .charts import get_chart

                chart = charts[name] = get_chart(name)
            J = chart.embed_jacobian(self.x[i])
            d[i] = J @ self.v[i]
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


def _rhs(conn, chart, x, v):
    g = conn.gamma(chart, x[None, :])[0]
    a = -np.einsum("ikl,k,l->i", g, v, v)
    return v, a


def _rk4_step(conn, chart, x, v, h):
    k1x, k1v = _rhs(conn, chart, x, v)
    k2x, k2v = _rhs(conn, chart, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
    k3x, k3v = _rhs(conn, chart, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
    k4x, k4v = _rhs(conn, chart, x + h * k3x, v + h * k3v)
    xn = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    vn = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return xn, vn


def _maybe_switch(conn, chart, x, v, switch_radius):
    if chart.kind != "sphere" or np.linalg.norm(x) <= switch_radius:
        return chart, x, v
    nxt = other_stereographic(chart)
    q, J = transition(chart, nxt, x)
    return nxt, q, J @ v


def integrate(conn, start: GeodesicState, h=DEFAULT_STEP, s_max=1.0,
              switch_radius=SWITCH_RADIUS) -> PathSample:
    """RK4 geodesic trace from `start`, recording every step."""
    if h <= 0.0:
        raise GeometryError("step must be positive")
    n_steps = int(round(s_max / h))
    if n_steps < 1:
        raise GeometryError("s_max below one step")
    chart, x, v = start.chart, start.x.copy(), start.v.copy()
    is_sphere = chart.kind == "sphere"
    ss = np.empty(n_steps + 1)
    xs = np.empty((n_steps + 1, 2))
    vs = np.empty((n_steps + 1, 2))
    names = []
    r3 = np.empty((n_steps + 1, 3)) if is_sphere else None
    for i in range(n_steps + 1):
        ss[i] = start.s + i * h
        xs[i] = x
        vs[i] = v
        names.append(chart.name)
        if is_sphere:
            r3[i] = chart.embed(x)
        if i == n_steps:
            break
        x, v = _rk4_step(conn, chart, x, v, h)
        if is_sphere:
            chart, x, v = _maybe_switch(conn, chart, x, v, switch_radius)
        elif not chart.contains(x, margin=-chart.extent * 9.0):
            raise DomainError("geodesic left all planar charts")
    return PathSample(s=ss, chart_names=names, x=xs, v=vs, r3=r3)


# ----------------------------------------------------------------------
# unparametrized comparison
# ----------------------------------------------------------------------
def _points_to_polyline(P, Q):
    """max over P of the distance to the polyline Q (vectorized)."""
    A = Q[:-1]
    T = Q[1:] - A
    tt = np.einsum("sd,sd->s", T, T)
    tt = np.where(tt == 0.0, 1.0, tt)
    worst = 0.0
    for chunk in np.array_split(P, max(1, len(P) // 512)):
        W = chunk[:, None, :] - A[None, :, :]
        lam = np.clip(np.einsum("psd,sd->ps", W, T) / tt, 0.0, 1.0)
        D = W - lam[..., None] * T[None, :, :]
        dist = np.sqrt(np.min(np.einsum("psd,psd->ps", D, D), axis=1))
        worst = max(worst, float(np.max(dist)))
    return worst


def unparametrized_deviation(p1: PathSample, p2: PathSample) -> float:
    """Symmetric point-set distance between two paths, ignoring parameter."""
    if len(p1) == 0 or len(p2) == 0:
        raise GeometryError("paths must be nonempty")
    if p1.r3 is not None and p2.r3 is not None:
        A, B = p1.r3, p2.r3
    else:
        A, B = p1.x, p2.x
    return max(_points_to_polyline(A, B), _points_to_polyline(B, A))


# ----------------------------------------------------------------------
# closure / planarity
# ----------------------------------------------------------------------
@dataclass
class ClosureResult:
    closed: bool
    s_return: float
    err: float
    min_self_gap: float | None = None
    path: PathSample | None = None
    detail: dict = dc_field(default_factory=dict)


def _phase_point(conn, chart, x, v):
    u3 = chart.embed(x)
    d3 = chart.embed_jacobian(x) @ v
    return u3, d3 / np.linalg.norm(d3)


def _phase_distance(a, b):
    return float(np.linalg.norm(a[0] - b[0]) + np.linalg.norm(a[1] - b[1]))


def closure_test(conn, start: GeodesicState, h=DEFAULT_STEP, tol=CLOSURE_TOL,
                 s_max=DEFAULT_S_MAX, switch_radius=SWITCH_RADIUS) -> ClosureResult:
    """First simultaneous return of (position, direction) on the sphere.

    Directions are compared as unit vectors, so the affine-parameter speed
    drift of a non-metric connection does not mask closure.  The candidate
    return parameter is refined by re-integrating a bracketing interval.
    """
    if start.chart.kind != "sphere":
        raise GeometryError("closure detection needs a sphere path")
    home = _phase_point(conn, start.chart, start.x, start.v)
    chart, x, v = start.chart, start.x.copy(), start.v.copy()
    states = [(0.0, chart, x.copy(), v.copy())]
    armed = False
    screen_gate = max(10.0 * tol, 1e-3)
    n_steps = int(round(s_max / h))
    dk_prev2 = dk_prev = None
    for i in range(1, n_steps + 1):
        x, v = _rk4_step(conn, chart, x, v, h)
        chart, x, v = _maybe_switch(conn, chart, x, v, switch_radius)
        states.append((i * h, chart, x.copy(), v.copy()))
        d = _phase_distance(_phase_point(conn, chart, x, v), home)
        if not armed and d > 0.5:
            armed = True
        if armed and dk_prev is not None and dk_prev2 is not None:
            if dk_prev <= dk_prev2 and dk_prev <= d:
                # near a genuine return the distance is V-shaped, so one
                # evaluation at the fitted vertex drops far below the sampled
                # minimum; smooth near-misses barely improve.  Only promising
                # dips pay for the golden-section refinement.
                sk = (i - 1) * h
                slope = (dk_prev2 + d) / (2.0 * h)
                s_est = sk - (d - dk_prev2) / (2.0 * slope) if slope > 0 else sk
                s_est = min(max(s_est, sk - h), sk + h)
                chart_e, x_e, v_e = _state_at(conn, states, s_est, h, switch_radius)
                d_est = _phase_distance(_phase_point(conn, chart_e, x_e, v_e), home)
                if d_est < max(screen_gate, 0.25 * dk_prev):
                    s_star, err = _refine_return(conn, states, i - 1, h, home, switch_radius)
                    if err <= tol:
                        self_gap = _min_self_gap(conn, states, h)
                        return ClosureResult(
                            closed=True, s_return=s_star, err=err,
                            min_self_gap=self_gap, path=_states_to_path(states),
                        )
        dk_prev2, dk_prev = dk_prev, d
    return ClosureResult(closed=False, s_return=float("nan"), err=float("inf"),
                         path=_states_to_path(states), detail={"budget": s_max})


def _states_to_path(states) -> PathSample:
    ss = np.array([st[0] for st in states])
    names = [st[1].name for st in states]
    xs = np.array([st[2] for st in states])
    vs = np.array([st[3] for st in states])
    r3 = np.array([st[1].embed(st[2]) for st in states])
    return PathSample(s=ss, chart_names=names, x=xs, v=vs, r3=r3)


# ----------------------------------------------------------------------
# batched closure: integrate many starts together so the vectorized
# coefficient pipeline is fed decent batches
# ----------------------------------------------------------------------
def _gamma_grouped(conn, charts, P):
    out = np.empty(P.shape[:-1] + (2, 2, 2))
    groups = {}
    for j, ch in enumerate(charts):
        groups.setdefault(ch.name, (ch, []))[1].append(j)
    for ch, idx in groups.values():
        out[idx] = conn.gamma(ch, P[idx])
    return out


def _rk4_step_batch(conn, charts, X, V, h):
    def acc(Xs, Vs):
        g = _gamma_grouped(conn, charts, Xs)
        return -np.einsum("mikl,mk,ml->mi", g, Vs, Vs)

    k1x, k1v = V, acc(X, V)
    k2x, k2v = V + 0.5 * h * k1v, acc(X + 0.5 * h * k1x, V + 0.5 * h * k1v)
    k3x, k3v = V + 0.5 * h * k2v, acc(X + 0.5 * h * k2x, V + 0.5 * h * k2v)
    k4x, k4v = V + h * k3v, acc(X + h * k3x, V + h * k3v)
    Xn = X + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    Vn = V + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return Xn, Vn


def _phase_batch(charts, X, V):
    u = np.empty((len(X), 3))
    d = np.empty((len(X), 3))
    groups = {}
    for j, ch in enumerate(charts):
        groups.setdefault(ch.name, (ch, []))[1].append(j)
    for ch, idx in groups.values():
        u[idx] = ch.embed(X[idx])
        J = ch.embed_jacobian(X[idx])
        d[idx] = np.einsum("mij,mj->mi", J, V[idx])
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return u, d


def closure_test_batch(conn, starts, h=DEFAULT_STEP, tol=CLOSURE_TOL,
                       s_max=DEFAULT_S_MAX, switch_radius=SWITCH_RADIUS):
    """closure_test for several starts at once; returns one result per start.

    All trajectories advance together so every RHS call hands the connection
    a batch of points; candidate returns are screened and refined exactly as
    in the scalar version.
    """
    m = len(starts)
    charts = [st.chart for st in starts]
    for ch in charts:
        if ch.kind != "sphere":
            raise GeometryError("closure detection needs sphere paths")
    X = np.array([st.x for st in starts], dtype=float)
    V = np.array([st.v for st in starts], dtype=float)
    u0, dir0 = _phase_batch(charts, X, V)
    homes = [(u0[j], dir0[j]) for j in range(m)]
    results: list = [None] * m
    hist_charts = [list(charts)]
    hist_x = [X.copy()]
    hist_v = [V.copy()]
    armed = [False] * m
    d1 = [None] * m
    d2 = [None] * m
    screen_gate = max(10.0 * tol, 1e-3)
    n_steps = int(round(s_max / h))
    active = set(range(m))

    def traj_states(j, upto):
        return [
            (i * h, hist_charts[i][j], hist_x[i][j], hist_v[i][j])
            for i in range(upto + 1)
        ]

    for i in range(1, n_steps + 1):
        X, V = _rk4_step_batch(conn, charts, X, V, h)
        for j in range(m):
            charts[j], X[j], V[j] = _maybe_switch(conn, charts[j], X[j], V[j], switch_radius)
        hist_charts.append(list(charts))
        hist_x.append(X.copy())
        hist_v.append(V.copy())
        uu, dd = _phase_batch(charts, X, V)
        for j in list(active):
            d = float(np.linalg.norm(uu[j] - homes[j][0]) + np.linalg.norm(dd[j] - homes[j][1]))
            if not armed[j] and d > 0.5:
                armed[j] = True
            if armed[j] and d1[j] is not None and d2[j] is not None:
                if d1[j] <= d2[j] and d1[j] <= d:
                    states = traj_states(j, i)
                    sk = (i - 1) * h
                    slope = (d2[j] + d) / (2.0 * h)
                    s_est = sk - (d - d2[j]) / (2.0 * slope) if slope > 0 else sk
                    s_est = min(max(s_est, sk - h), sk + h)
                    ch_e, x_e, v_e = _state_at(conn, states, s_est, h, switch_radius)
                    d_est = _phase_distance(_phase_point(conn, ch_e, x_e, v_e), homes[j])
                    if d_est < max(screen_gate, 0.25 * d1[j]):
                        s_star, err = _refine_return(conn, states, i - 1, h, homes[j], switch_radius)
                        if err <= tol:
                            results[j] = ClosureResult(
                                closed=True, s_return=s_star, err=err,
                                min_self_gap=_min_self_gap(conn, states, h),
                                path=_states_to_path(states),
                            )
                            active.discard(j)
            d2[j], d1[j] = d1[j], d
        if not active:
            break
    for j in active:
        results[j] = ClosureResult(
            closed=False, s_return=float("nan"), err=float("inf"),
            path=_states_to_path(traj_states(j, min(i, n_steps))),
            detail={"budget": s_max},
        )
    return results


def _state_at(conn, states, s, h, switch_radius):
    idx = min(int(s / h), len(states) - 1)
    s0, chart, x, v = states[idx]
    x, v = x.copy(), v.copy()
    while s0 + h <= s + 1e-15:
        x, v = _rk4_step(conn, chart, x, v, h)
        chart, x, v = _maybe_switch(conn, chart, x, v, switch_radius)
        s0 += h
    rem = s - s0
    if rem > 1e-15:
        x, v = _rk4_step(conn, chart, x, v, rem)
        chart, x, v = _maybe_switch(conn, chart, x, v, switch_radius)
    return chart, x, v


def _refine_return(conn, states, k, h, home, switch_radius):
    lo = max(0.0, (k - 2) * h)
    hi = (k + 2) * h

    def dist(s):
        chart, x, v = _state_at(conn, states, s, h, switch_radius)
        return _phase_distance(_phase_point(conn, chart, x, v), home)

    return golden_minimize(dist, lo, hi)


def _min_self_gap(conn, states, h, thin=25):
    """Sampled minimum distance between non-neighbouring points (heuristic
    embeddedness report; never asserted)."""
    pts = np.array([s[1].embed(s[2]) for s in states[::thin]])
    if len(pts) < 5:
        return None
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    n = len(pts)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    D[idx <= 2] = np.inf
    return float(np.min(D))


def great_circle_residual(path: PathSample) -> float:
    """Smallest singular value of the embedded positions: distance of the
    sampled curve from the best plane through the origin."""
    if path.r3 is None or len(path) < 3:
        raise GeometryError("need at least three embedded samples")
    return float(np.linalg.svd(path.r3, compute_uv=False)[-1])
