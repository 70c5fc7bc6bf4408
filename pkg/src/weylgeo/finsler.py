"""Unit-tangent-bundle coframes and the constant-curvature structure checks.

For a representative (g, beta) on a chart, the bundle is parametrized by
(x, y, phi) with the direction measured against the orthonormal frame from
the Cholesky factor of g.  The canonical metric coframe (alpha1, alpha2,
alpha3) is assembled from that frame and its rotation form; the rescaled
coframe

    omega1 = pull(*beta) - alpha3
    omega2 = sqrt(delta beta + R) alpha2
    omega3 = sqrt(delta beta + R) alpha1

satisfies the K = 1 structure equations whenever delta beta + R > 0.  Signs
are pinned by the area identity d(pull(*beta) - alpha3) = (delta beta + R)
times the pulled-back area form, which is tested directly: the Hodge star is
*dx = dy, *dy = -dx, and the codifferential of a 1-form is the one with
delta(du) equal to the metric Laplacian of u, i.e. delta beta =
+e^{-2f} div(beta) in an isothermal chart.  (The opposite sign for delta
breaks both the identity and the gauge invariance of delta beta + R.)
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .charts import Chart, SPHERE_ATLAS, chart_grid, get_chart, other_stereographic, transition
from .errors import GeometryError, PositivityError
from .fields import OneFormField, OneFormJet, ScalarField, ScalarJet
from .jets import Jet2

FD_STEP = 1e-4


# ----------------------------------------------------------------------
# bundle points and samples
# ----------------------------------------------------------------------
@dataclass
class UTBPoint:
    chart: Chart
    x: np.ndarray
    phi: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(2)
        self.phi = float(self.phi) % (2.0 * np.pi)


@dataclass
class CoframeSample:
    """Rows are form components in the (dx, dy, dphi) basis."""

    point: UTBPoint
    alpha: np.ndarray | None = None
    omega: np.ndarray | None = None
    scalars: dict = dc_field(default_factory=dict)

    def check_invertible(self, which="omega", tol=1e-10):
        m = getattr(self, which)
        if m is None or abs(np.linalg.det(m)) <= tol:
            raise GeometryError(f"{which} coframe is singular")
        return m


@dataclass
class CoframeInvariants:
    I: float
    C: float
    K_residual: float
    eq_residuals: np.ndarray


# ----------------------------------------------------------------------
# providers: uniform sampling interface for (G, dG, d2G, beta, dbeta)
# ----------------------------------------------------------------------
class ConformalWeylData:
    """Sampler for an analytic pair (e^{2f} identity, beta) via jets."""

    def __init__(self, factor: ScalarField, beta: OneFormField, atlas=SPHERE_ATLAS):
        self.factor = factor
        self.beta_field = beta
        self.atlas = tuple(atlas)

    def sample(self, chart, pts):
        from .conics import WeylSample

        pts = np.asarray(pts, dtype=float)
        fj = self.factor.jet(chart, pts, order=2)
        bj = self.beta_field.jet(chart, pts, order=1)
        e2f = np.exp(2.0 * fj.value)
        eye = np.eye(2)
        G = e2f[..., None, None] * eye
        dG = 2.0 * fj.grad[..., :, None, None] * G[..., None, :, :]
        coef = 2.0 * fj.hess + 4.0 * fj.grad[..., :, None] * fj.grad[..., None, :]
        d2G = coef[..., :, :, None, None] * G[..., None, None, :, :]
        return WeylSample(
            G=G, dG=dG, d2G=d2G, beta=bj.b, dbeta=bj.db,
            residual=np.zeros(pts.shape[:-1]),
        )

    def connection(self, chart, pts):
        from .connections import conformal_lc_coeffs, weyl_gamma

        pts = np.asarray(pts, dtype=float)
        fj = self.factor.jet(chart, pts, order=1)
        bj = self.beta_field.jet(chart, pts, order=0)
        e2f = np.exp(2.0 * fj.value)
        G = e2f[..., None, None] * np.eye(2)
        return conformal_lc_coeffs(fj.grad[..., 0], fj.grad[..., 1]) + weyl_gamma(G, bj.b)


# ----------------------------------------------------------------------
# coframe core: Cholesky frame, rotation form, curvature, codifferential
# ----------------------------------------------------------------------
def _pack_scalar_jets(value, grad, hess=None):
    """Numbers -> an order-1/2 jet with the given derivatives."""
    order = 1 if hess is None else 2
    c = np.zeros((order + 1, order + 1))
    c[0, 0] = value
    c[1, 0] = grad[0]
    c[0, 1] = grad[1]
    if hess is not None:
        c[2, 0] = 0.5 * hess[0, 0]
        c[1, 1] = hess[0, 1]
        c[0, 2] = 0.5 * hess[1, 1]
    return Jet2(c, order)


def _metric_jets(G, dG, d2G=None):
    out = [[None, None], [None, None]]
    for i in range(2):
        for j in range(2):
            grad = (dG[0, i, j], dG[1, i, j])
            hess = None if d2G is None else d2G[:, :, i, j]
            out[i][j] = _pack_scalar_jets(G[i, j], grad, hess)
    return out


@dataclass
class FrameData:
    """Everything the coframe formulas need at one base point."""

    L: np.ndarray         # Cholesky factor of the metric (lower, positive diag)
    psi: np.ndarray       # rotation form components (dx, dy)
    R: float              # Gauss curvature
    star_beta: np.ndarray
    delta_beta: float
    beta: np.ndarray
    detL: float


def frame_data(G, dG, d2G, beta, dbeta) -> FrameData:
    """Cholesky coframe, rotation form, curvature and codifferential from jets.

    The jet arithmetic differentiates the closed-form Cholesky factor, which
    is how psi derivatives (hence R) come out without hand-derived second
    derivative formulas.
    """
    Gj = _metric_jets(G, dG, d2G)
    L11 = Gj[0][0].sqrt()
    L21 = Gj[0][1] / L11
    L22 = (Gj[1][1] - L21 * L21).sqrt()
    detL = L11 * L22
    Ld = np.array([[L11.value, 0.0], [L21.value, L22.value]])
    # d eta^1 = c1 dx^dy, d eta^2 = c2 dx^dy for eta^a = sum_i L_ia dx^i;
    # the c's are order-1 jets, so psi is kept at order 1 throughout
    c1 = L21.deriv(0) - L11.deriv(1)
    c2 = L22.deriv(0)
    d1 = detL.truncate(1)
    psi1 = (L11.truncate(1) * c1) / d1  # L12 = 0
    psi2 = (L21.truncate(1) * c1 + L22.truncate(1) * c2) / d1
    # R = -(d1 psi2 - d2 psi1)/detL evaluated at the point
    R = -(psi2.grad[0] - psi1.grad[1]) / detL.value
    # *beta = G . (-b2, b1) / detL ; delta beta = (d1(*b)2 - d2(*b)1)/detL
    bj = [_pack_scalar_jets(beta[i], (dbeta[0, i], dbeta[1, i])) for i in range(2)]
    rot = [-1.0 * bj[1], bj[0]]
    G1 = [[Gj[i][j].truncate(1) for j in range(2)] for i in range(2)]
    sb1 = (G1[0][0] * rot[0] + G1[0][1] * rot[1]) / d1
    sb2 = (G1[1][0] * rot[0] + G1[1][1] * rot[1]) / d1
    delta_beta = (sb2.grad[0] - sb1.grad[1]) / detL.value
    return FrameData(
        L=Ld,
        psi=np.array([psi1.value, psi2.value]),
        R=float(R),
        star_beta=np.array([sb1.value, sb2.value]),
        delta_beta=float(delta_beta),
        beta=np.asarray(beta, dtype=float).copy(),
        detL=float(detL.value),
    )


def _alpha_rows(fd: FrameData, phi):
    c, s = np.cos(phi), np.sin(phi)
    L = fd.L
    a1 = np.array([c * L[0, 0] + s * 0.0, c * L[1, 0] + s * L[1, 1], 0.0])
    a2 = np.array([-s * L[0, 0], -s * L[1, 0] + c * L[1, 1], 0.0])
    a3 = np.array([fd.psi[0], fd.psi[1], 1.0])
    return np.stack([a1, a2, a3])


def _omega_rows(fd: FrameData, phi):
    lam2 = fd.delta_beta + fd.R
    if lam2 <= 0.0:
        raise PositivityError(
            f"delta beta + R = {lam2:.6g} is not positive at this point"
        )
    lam = np.sqrt(lam2)
    alpha = _alpha_rows(fd, phi)
    w1 = np.array([fd.star_beta[0] - fd.psi[0], fd.star_beta[1] - fd.psi[1], -1.0])
    return np.stack([w1, lam * alpha[1], lam * alpha[0]]), alpha


def coframe_sample(data, u: UTBPoint) -> CoframeSample:
    """alpha and omega coframes of a Weyl sampler at a bundle point."""
    s = data.sample(u.chart, u.x[None, :])
    fd = frame_data(s.G[0], s.dG[0], s.d2G[0], s.beta[0], s.dbeta[0])
    omega, alpha = _omega_rows(fd, u.phi)
    return CoframeSample(
        point=u, alpha=alpha, omega=omega,
        scalars={"R": fd.R, "delta_beta": fd.delta_beta,
                 "positivity": fd.delta_beta + fd.R},
    )


# ----------------------------------------------------------------------
# isothermal closed forms (independent of the Cholesky route)
# ----------------------------------------------------------------------
def riemannian_coframe(f: ScalarJet, u: UTBPoint) -> CoframeSample:
    """Canonical metric coframe of e^{2f} identity:
    alpha1 = e^f(cos dx + sin dy), alpha2 = e^f(-sin dx + cos dy),
    alpha3 = dphi - f_y dx + f_x dy."""
    ef = float(np.exp(f.value))
    c, s = np.cos(u.phi), np.sin(u.phi)
    fx, fy = f.grad
    alpha = np.array(
        [
            [ef * c, ef * s, 0.0],
            [-ef * s, ef * c, 0.0],
            [-fy, fx, 1.0],
        ]
    )
    return CoframeSample(point=u, alpha=alpha)


def gauss_curvature(f: ScalarJet) -> float:
    """R = -e^{-2f} (f_xx + f_yy) for the metric e^{2f} identity."""
    return float(-np.exp(-2.0 * f.value) * (f.hess[0, 0] + f.hess[1, 1]))


def codifferential(beta: OneFormJet, f: ScalarJet) -> float:
    """delta beta = +e^{-2f} (d1 beta1 + d2 beta2) in an isothermal chart.

    The sign is the one pinned by the area identity test below; with it
    delta(du) equals the metric Laplacian of u and delta beta + R rescales by
    e^{-2u} under the gauge move (e^{2u} g, beta + du).
    """
    if beta.db is None:
        raise GeometryError("codifferential needs 1-form derivatives")
    return float(np.exp(-2.0 * f.value) * (beta.db[0, 0] + beta.db[1, 1]))


def hodge_star_oneform(beta_components):
    """*(b1 dx + b2 dy) = -b2 dx + b1 dy (+90 degree rotation convention)."""
    b1, b2 = beta_components
    return np.array([-b2, b1])


def finsler_coframe(f: ScalarJet, beta: OneFormJet, u: UTBPoint) -> CoframeSample:
    """The rescaled coframe of the pair (e^{2f} identity, beta), isothermal case."""
    R = gauss_curvature(f)
    db = codifferential(beta, f)
    lam2 = db + R
    if lam2 <= 0.0:
        raise PositivityError(f"delta beta + R = {lam2:.6g} is not positive")
    lam = np.sqrt(lam2)
    base = riemannian_coframe(f, u).alpha
    sb = hodge_star_oneform(beta.b)
    w1 = np.array([sb[0], sb[1], 0.0]) - base[2]
    omega = np.stack([w1, lam * base[1], lam * base[0]])
    return CoframeSample(point=u, alpha=base, omega=omega,
                         scalars={"R": R, "delta_beta": db, "positivity": lam2})


# ----------------------------------------------------------------------
# positivity
# ----------------------------------------------------------------------
@dataclass
class PositivityReport:
    min_value: float
    positive: bool
    argmin: np.ndarray

    def to_json_dict(self):
        return {
            "min_value": self.min_value,
            "positive": bool(self.positive),
            "argmin": [float(v) for v in self.argmin],
        }


def positivity(factor: ScalarField, beta: OneFormField, chart: Chart,
               n=33, margin=0.05) -> PositivityReport:
    """min over a chart grid of delta beta + R for an analytic pair."""
    return positivity_scan(ConformalWeylData(factor, beta, atlas=(chart,)), chart,
                           n=n, margin=margin)


def positivity_scan(data, chart: Chart, n=33, margin=0.05) -> PositivityReport:
    pts = chart_grid(chart, n=n, margin=margin)
    vals = np.empty(len(pts))
    for i, p in enumerate(pts):
        s = data.sample(chart, p[None, :])
        fd = frame_data(s.G[0], s.dG[0], s.d2G[0], s.beta[0], s.dbeta[0])
        vals[i] = fd.delta_beta + fd.R
    k = int(np.argmin(vals))
    return PositivityReport(min_value=float(vals[k]), positive=bool(vals[k] > 0.0),
                            argmin=pts[k])


# ----------------------------------------------------------------------
# structure equations by finite-difference exterior derivative
# ----------------------------------------------------------------------
def _coframe_matrix_fn(data, chart, which="omega"):
    def fn(x, y, phi):
        s = data.sample(chart, np.array([[x, y]]))
        fd = frame_data(s.G[0], s.dG[0], s.d2G[0], s.beta[0], s.dbeta[0])
        if which == "omega":
            return _omega_rows(fd, phi)[0]
        return _alpha_rows(fd, phi)

    return fn


def exterior_derivative_fd(matrix_fn, x, y, phi, h=FD_STEP):
    """d of each coframe row by central differences in (x, y, phi).

    Returns F with F[i, j, k] = d_j C[i, k] - d_k C[i, j], so dW_i =
    (1/2) F[i, j, k] dx^j ^ dx^k in the coordinate cobasis.
    """
    dC = np.empty((3, 3, 3))
    args = np.array([x, y, phi])
    for j in range(3):
        hi = args.copy()
        lo = args.copy()
        hi[j] += h
        lo[j] -= h
        dC[j] = (matrix_fn(*hi) - matrix_fn(*lo)) / (2.0 * h)
    return np.einsum("jik->ijk", dC) - np.einsum("kij->ijk", dC)


def _wedge(a, b):
    """Component matrix of a ^ b for 1-form component vectors."""
    return np.outer(a, b) - np.outer(b, a)


def riemannian_structure_residuals(data, u: UTBPoint, h=FD_STEP):
    """FD residuals of d a1 + a2^a3, d a2 + a3^a1, d a3 + R a1^a2."""
    fn = _coframe_matrix_fn(data, u.chart, which="alpha")
    F = exterior_derivative_fd(fn, u.x[0], u.x[1], u.phi, h=h)
    sam = coframe_sample(data, u)
    a = sam.alpha
    R = sam.scalars["R"]
    res = [
        F[0] + _wedge(a[1], a[2]),
        F[1] + _wedge(a[2], a[0]),
        F[2] + R * _wedge(a[0], a[1]),
    ]
    return np.array([np.max(np.abs(r)) for r in res])


def coframe_invariants(data, u: UTBPoint, h=FD_STEP) -> CoframeInvariants:
    """Expand the FD exterior derivatives of the rescaled coframe in its own
    basis and read off I, C and the curvature normalization.

    Expected:  dw1 = -w2^w3,  dw2 = w1^w3 - I w2^w3,  dw3 = -K w1^w2 - C w2^w3
    with K = 1; eq_residuals hold whatever coefficients remain after I, C, K
    are extracted.
    """
    fn = _coframe_matrix_fn(data, u.chart, which="omega")
    M = fn(u.x[0], u.x[1], u.phi)
    if abs(np.linalg.det(M)) < 1e-10:
        raise GeometryError("singular coframe")
    Minv = np.linalg.inv(M)
    F = exterior_derivative_fd(fn, u.x[0], u.x[1], u.phi, h=h)
    # half factor: F double-counts each (j, k) pair
    T = 0.5 * np.einsum("ja,ijk,kb->iab", Minv, F, Minv)
    T = T - np.swapaxes(T, -1, -2)
    I_val = -T[1, 1, 2]
    C_val = -T[2, 1, 2]
    K_val = -T[2, 0, 1]
    eq1 = np.array([T[0, 0, 1], T[0, 0, 2], T[0, 1, 2] + 1.0])
    eq2 = np.array([T[1, 0, 1], T[1, 0, 2] - 1.0])
    eq3 = np.array([T[2, 0, 2]])
    return CoframeInvariants(
        I=float(I_val),
        C=float(C_val),
        K_residual=float(abs(K_val - 1.0)),
        eq_residuals=np.array(
            [np.max(np.abs(eq1)), np.max(np.abs(eq2)), np.max(np.abs(eq3))]
        ),
    )


def area_identity_residual(data, u: UTBPoint, h=FD_STEP) -> float:
    """FD residual of d(pull(*beta) - alpha3) - (delta beta + R) pull(mu).

    This single check pins every sign convention in the module: the Hodge
    star, the codifferential and the curvature normalization.
    """
    def w1_fn(x, y, phi):
        s = data.sample(u.chart, np.array([[x, y]]))
        fd = frame_data(s.G[0], s.dG[0], s.d2G[0], s.beta[0], s.dbeta[0])
        row = np.zeros((3, 3))
        row[0] = np.array([fd.star_beta[0] - fd.psi[0], fd.star_beta[1] - fd.psi[1], -1.0])
        return row

    F = exterior_derivative_fd(w1_fn, u.x[0], u.x[1], u.phi, h=h)[0]
    s = data.sample(u.chart, u.x[None, :])
    fd = frame_data(s.G[0], s.dG[0], s.d2G[0], s.beta[0], s.dbeta[0])
    mu = np.zeros((3, 3))
    mu[0, 1] = fd.detL
    mu[1, 0] = -fd.detL
    return float(np.max(np.abs(F - (fd.delta_beta + fd.R) * mu)))


# ----------------------------------------------------------------------
# the w1 flow
# ----------------------------------------------------------------------
@dataclass
class FlowPeriod:
    period: float
    err: float
    closed: bool


class _FrameCache:
    """Memoized frame data per (chart, base point); the vertical flow and its
    refinement revisit the same bases constantly."""

    def __init__(self, data, max_size=4096):
        self.data = data
        self._store = {}
        self.max_size = max_size

    def at(self, chart, x, y):
        key = (chart.name, float(x), float(y))
        fd = self._store.get(key)
        if fd is None:
            s = self.data.sample(chart, np.array([[x, y]]))
            fd = frame_data(s.G[0], s.dG[0], s.d2G[0], s.beta[0], s.dbeta[0])
            if len(self._store) >= self.max_size:
                self._store.clear()
            self._store[key] = fd
        return fd


def _utb_phase(cache: _FrameCache, chart, x, phi):
    fd = cache.at(chart, x[0], x[1])
    E = np.linalg.inv(fd.L).T  # columns are the frame vectors
    v2 = np.cos(phi) * E[:, 0] + np.sin(phi) * E[:, 1]
    u3 = chart.embed(x)
    d3 = chart.embed_jacobian(x) @ v2
    return u3, d3 / np.linalg.norm(d3)


def _utb_switch(cache: _FrameCache, chart, x, phi, switch_radius=1.5):
    if chart.kind != "sphere" or np.linalg.norm(x) <= switch_radius:
        return chart, x, phi
    nxt = other_stereographic(chart)
    q, J = transition(chart, nxt, x)
    fd = cache.at(chart, x[0], x[1])
    E = np.linalg.inv(fd.L).T
    v2 = np.cos(phi) * E[:, 0] + np.sin(phi) * E[:, 1]
    v2n = J @ v2
    fdn = cache.at(nxt, q[0], q[1])
    comps = fdn.L.T @ v2n
    return nxt, q, float(np.arctan2(comps[1], comps[0]))


def _flow_rhs(cache: _FrameCache, chart, st):
    fd = cache.at(chart, st[0], st[1])
    M, _ = _omega_rows(fd, st[2])
    return np.linalg.solve(M, np.array([1.0, 0.0, 0.0]))


def _flow_step(cache, chart, st, h):
    k1 = _flow_rhs(cache, chart, st)
    k2 = _flow_rhs(cache, chart, st + 0.5 * h * k1)
    k3 = _flow_rhs(cache, chart, st + 0.5 * h * k2)
    k4 = _flow_rhs(cache, chart, st + h * k3)
    st = st + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    chart, xq, phiq = _utb_switch(cache, chart, st[:2], st[2])
    return chart, np.array([xq[0], xq[1], phiq])


def w1_flow_period(data, start: UTBPoint, h=1e-2, tol=1e-3, s_max=10.0) -> FlowPeriod:
    """Integrate the vector field dual to omega1 and report the first return.

    The flow is integrated in the bundle coordinates (x, y, phi) with chart
    switching; returns are detected on the (base point, direction) pair in
    R^3 and refined by golden-section re-integration.
    """
    cache = _FrameCache(data)
    chart = start.chart
    state = np.array([start.x[0], start.x[1], start.phi])
    home = _utb_phase(cache, chart, state[:2], state[2])
    states = [(0.0, chart, state.copy())]
    n_steps = int(round(s_max / h))
    d_prev2 = d_prev = None
    armed = False
    for i in range(1, n_steps + 1):
        chart, state = _flow_step(cache, chart, state, h)
        states.append((i * h, chart, state.copy()))
        d = _phase_dist(_utb_phase(cache, chart, state[:2], state[2]), home)
        if not armed and d > 0.5:
            armed = True
        if armed and d_prev is not None and d_prev2 is not None:
            if d_prev <= d_prev2 and d_prev <= d and d_prev < 0.1:
                s_star, err = _refine_flow_return(cache, states, i - 1, h, home)
                return FlowPeriod(period=s_star, err=err, closed=err <= tol)
        d_prev2, d_prev = d_prev, d
    return FlowPeriod(period=float("nan"), err=float("inf"), closed=False)


def _phase_dist(a, b):
    return float(np.linalg.norm(a[0] - b[0]) + np.linalg.norm(a[1] - b[1]))


def _refine_flow_return(cache, states, k, h, home):
    def state_at(s):
        idx = min(int(s / h), len(states) - 1)
        s0, chart, st = states[idx]
        st = st.copy()
        while s0 + h <= s + 1e-15:
            chart, st = _flow_step(cache, chart, st, h)
            s0 += h
        rem = s - s0
        if rem > 1e-15:
            chart, st = _flow_step(cache, chart, st, rem)
        return chart, st

    def dist(s):
        chart, st = state_at(s)
        return _phase_dist(_utb_phase(cache, chart, st[:2], st[2]), home)

    from .geodesics import golden_minimize

    lo = max(0.0, (k - 2) * h)
    hi = (k + 2) * h
    return golden_minimize(dist, lo, hi)
