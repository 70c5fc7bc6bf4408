import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import weylgeo as wg
from weylgeo.connections import (
    ConnectionCoeffs,
    epsilon_modification,
    levi_civita,
    nabla_g_residual,
    projective_invariants,
    projectively_equivalent,
    recover_epsilon,
    weyl_connection,
)
from weylgeo.fields import (
    ConformalMetric,
    MetricJet,
    OneFormJet,
    flat_factor,
    round_factor,
)
from weylgeo.jets import fd_oracle

IDENTITY = MetricJet(g=np.eye(2), dg=np.zeros((2, 2, 2)))


def _sym(rng, shape=(2, 2, 2)):
    g = rng.uniform(-1.0, 1.0, shape)
    return 0.5 * (g + np.swapaxes(g, -2, -1))


# ----------------------------------------------------------------------
# levi_civita
# ----------------------------------------------------------------------
def test_lc_flat_is_zero():
    c = levi_civita(IDENTITY)
    assert np.allclose(c.gamma, 0.0)


def test_lc_round_at_origin_is_zero():
    m = ConformalMetric(round_factor()).jet(wg.NORTH, [0.0, 0.0], order=1)
    assert np.allclose(levi_civita(m).gamma, 0.0, atol=1e-14)


def test_lc_round_at_unit_point():
    # conformal coefficients with f_x = -1, f_y = 0
    m = ConformalMetric(round_factor()).jet(wg.NORTH, [1.0, 0.0], order=1)
    g = levi_civita(m).gamma
    expect = np.zeros((2, 2, 2))
    expect[0, 0, 0] = -1.0   # f_x
    expect[0, 1, 1] = 1.0    # -f_x
    expect[1, 0, 1] = expect[1, 1, 0] = -1.0  # f_x
    assert np.allclose(g, expect, atol=1e-13)


def test_lc_cross_checked_against_fd_oracle():
    metric = ConformalMetric(round_factor())
    p = [0.6, -0.4]
    m = metric.jet(wg.NORTH, p, order=1)
    g = levi_civita(m).gamma
    # rebuild from FD derivatives of the metric components
    dg = np.empty((2, 2, 2))
    for mm, idx in ((0, (1, 0)), (1, (0, 1))):
        for i in range(2):
            for j in range(2):
                dg[mm, i, j] = fd_oracle(
                    lambda x, y, i=i, j=j: metric.jet(
                        wg.NORTH, [x, y], order=0
                    ).g[i, j],
                    wg.NORTH, p, idx,
                )
    ginv = np.linalg.inv(m.g)
    term = np.einsum("lmk->mkl", dg) + np.einsum("kml->mkl", dg) - dg
    ref = 0.5 * np.einsum("im,mkl->ikl", ginv, term)
    assert np.max(np.abs(g - ref)) < 1e-7


def test_lc_metric_compatibility():
    m = ConformalMetric(round_factor()).jet(wg.NORTH, [0.5, 0.3], order=1)
    c = levi_civita(m)
    assert nabla_g_residual(m, OneFormJet(b=np.zeros(2)), c) < 1e-13


# ----------------------------------------------------------------------
# weyl_connection
# ----------------------------------------------------------------------
def test_weyl_zero_form_reduces_to_lc():
    m = ConformalMetric(round_factor()).jet(wg.NORTH, [0.7, 0.2], order=1)
    c0 = levi_civita(m)
    cw = weyl_connection(m, OneFormJet(b=np.zeros(2)))
    assert np.allclose(cw.gamma, c0.gamma)


def test_weyl_identity_metric_dx():
    cw = weyl_connection(IDENTITY, OneFormJet(b=np.array([1.0, 0.0])))
    expect = np.zeros((2, 2, 2))
    expect[0, 0, 0] = -1.0
    expect[0, 1, 1] = 1.0
    expect[1, 0, 1] = expect[1, 1, 0] = -1.0
    assert np.allclose(cw.gamma, expect)


def test_weyl_identity_metric_dy_by_symmetry():
    cw = weyl_connection(IDENTITY, OneFormJet(b=np.array([0.0, 1.0])))
    expect = np.zeros((2, 2, 2))
    expect[1, 1, 1] = -1.0
    expect[1, 0, 0] = 1.0
    expect[0, 0, 1] = expect[0, 1, 0] = -1.0
    assert np.allclose(cw.gamma, expect)


def test_weyl_defining_derivative_property(rng):
    # nabla g = 2 beta (x) g, checked with full derivative jets
    from weylgeo.fields import poly_one_form

    metric = ConformalMetric(round_factor())
    beta = poly_one_form([[0.1], [0.4]], [[-0.2, 0.3]])
    for _ in range(10):
        p = rng.uniform(-0.9, 0.9, 2)
        m = metric.jet(wg.NORTH, p, order=1)
        bj = beta.jet(wg.NORTH, p, order=1)
        cw = weyl_connection(m, bj)
        assert nabla_g_residual(m, bj, cw) < 1e-8


# ----------------------------------------------------------------------
# projective invariants
# ----------------------------------------------------------------------
def test_invariants_of_zero():
    d = projective_invariants(ConnectionCoeffs(np.zeros((2, 2, 2))))
    assert np.allclose(d.pi, 0.0)
    assert np.allclose(d.kappa, 0.0)


def test_invariants_of_weyl_dx():
    cw = weyl_connection(IDENTITY, OneFormJet(b=np.array([1.0, 0.0])))
    d = projective_invariants(cw)
    assert d.pi[0, 0, 0] == pytest.approx(1.0 / 3.0)
    assert np.allclose(d.kappa, [0.0, -1.0 / 3.0, 0.0, -1.0])


def test_invariants_of_conformal_lc():
    # kappa = (-f_y, f_x/3, -f_y/3, f_x) for the metric's own connection
    metric = ConformalMetric(round_factor())
    factor = round_factor()
    for p in ([0.4, 0.8], [-0.2, 0.5]):
        fj = factor.jet(wg.NORTH, p, order=1)
        d = projective_invariants(levi_civita(metric.jet(wg.NORTH, p, order=1)))
        fx, fy = fj.grad
        assert np.allclose(d.kappa, [-fy, fx / 3.0, -fy / 3.0, fx], atol=1e-13)


def test_trace_free():
    rng = np.random.default_rng(5)
    for _ in range(20):
        c = ConnectionCoeffs(_sym(rng))
        pi = projective_invariants(c).pi
        assert np.max(np.abs(np.einsum("iil->l", pi))) < 1e-12


def test_kappa_pi_consistency_table():
    rng = np.random.default_rng(6)
    for _ in range(20):
        d = projective_invariants(ConnectionCoeffs(_sym(rng)))
        k0, k1, k2, k3 = d.kappa
        assert d.pi[0, 0, 0] == pytest.approx(-k1, abs=1e-12)
        assert d.pi[0, 0, 1] == pytest.approx(-k2, abs=1e-12)
        assert d.pi[0, 1, 0] == pytest.approx(-k2, abs=1e-12)
        assert d.pi[0, 1, 1] == pytest.approx(-k3, abs=1e-12)
        assert d.pi[1, 0, 0] == pytest.approx(k0, abs=1e-12)
        assert d.pi[1, 0, 1] == pytest.approx(k1, abs=1e-12)
        assert d.pi[1, 1, 1] == pytest.approx(k2, abs=1e-12)


# ----------------------------------------------------------------------
# equivalence and the epsilon form
# ----------------------------------------------------------------------
def test_equivalence_reflexive():
    c = ConnectionCoeffs(_sym(np.random.default_rng(7)))
    res = projectively_equivalent(c, c)
    assert res.equivalent
    assert np.allclose(res.epsilon.e, 0.0)


def test_equivalence_epsilon_shift_example():
    c1 = ConnectionCoeffs(np.zeros((2, 2, 2)))
    gamma = np.zeros((2, 2, 2))
    gamma[0, 0, 0] = 2.0
    gamma[1, 0, 1] = gamma[1, 1, 0] = 1.0
    res = projectively_equivalent(c1, ConnectionCoeffs(gamma))
    assert res.equivalent
    assert np.allclose(res.epsilon.e, [1.0, 0.0], atol=1e-14)


def test_weyl_dx_not_equivalent_to_flat():
    c1 = ConnectionCoeffs(np.zeros((2, 2, 2)))
    c2 = weyl_connection(IDENTITY, OneFormJet(b=np.array([1.0, 0.0])))
    assert not projectively_equivalent(c1, c2).equivalent


coef = st.floats(-2.0, 2.0, allow_nan=False)


@given(arrays(float, (2, 2, 2), elements=coef), arrays(float, (2,), elements=coef))
def test_invariants_blind_to_epsilon(gamma, eps):
    c = ConnectionCoeffs(0.5 * (gamma + np.swapaxes(gamma, 1, 2)))
    c2 = epsilon_modification(c, eps)
    gap = np.abs(projective_invariants(c).pi - projective_invariants(c2).pi)
    assert np.max(gap) < 1e-12


@given(arrays(float, (2, 2, 2), elements=coef), arrays(float, (2,), elements=coef))
def test_epsilon_roundtrip(gamma, eps):
    c = ConnectionCoeffs(0.5 * (gamma + np.swapaxes(gamma, 1, 2)))
    c2 = epsilon_modification(c, eps)
    assert np.max(np.abs(recover_epsilon(c, c2).e - eps)) < 1e-12
    # reconstruction reproduces the modified coefficients
    c3 = epsilon_modification(c, recover_epsilon(c, c2))
    assert np.max(np.abs(c3.gamma - c2.gamma)) < 1e-12


def test_gauge_move_preserves_invariants(rng):
    # (e^{2u} g, beta + du) has the same invariant tensor as (g, beta)
    from weylgeo.compat import WeylStructureChart, rescale_pair
    from weylgeo.fields import ScalarField, poly_factor, poly_one_form

    metric = ConformalMetric(round_factor())
    beta = poly_one_form([[0.2], [0.1]], [[0.0, -0.3]])
    u_field = poly_factor([[0.0, 0.2], [-0.1]])
    m2, b2 = rescale_pair(metric, beta, u_field)
    for _ in range(10):
        p = rng.uniform(-0.9, 0.9, 2)
        c1 = weyl_connection(metric.jet(wg.NORTH, p, 1), beta.jet(wg.NORTH, p, 0))
        c2 = weyl_connection(m2.jet(wg.NORTH, p, 1), b2.jet(wg.NORTH, p, 0))
        res = projectively_equivalent(c1, c2, tol=1e-10)
        assert res.equivalent, res.pi_gap
