import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import weylgeo as wg
from weylgeo.errors import DomainError, JetOrderError
from weylgeo.fields import (
    ConformalMetric,
    eval_jet,
    flat_factor,
    hyperbolic_factor,
    poly_factor,
    round_factor,
)
from weylgeo.jets import Jet2, fd_oracle

LN2 = np.log(2.0)


# ----------------------------------------------------------------------
# frozen examples
# ----------------------------------------------------------------------
def test_round_factor_at_origin():
    j = eval_jet(round_factor(), wg.NORTH, [0.0, 0.0], 1)
    assert j.value == pytest.approx(LN2, abs=1e-15)
    assert np.allclose(j.grad, 0.0, atol=1e-15)


def test_flat_factor_everywhere():
    j = eval_jet(flat_factor(), wg.PLANAR, [0.4, -0.7], 2)
    assert j.value == 0.0
    assert np.allclose(j.grad, 0.0)
    assert np.allclose(j.hess, 0.0)


def test_round_factor_gradient_off_origin():
    # d/dx of ln 2 - ln(1 + r^2) at (1, 0) is -2x/(1+r^2) = -1
    j = eval_jet(round_factor(), wg.NORTH, [1.0, 0.0], 1)
    assert np.allclose(j.grad, [-1.0, 0.0], atol=1e-14)


def test_fd_oracle_zero_field():
    assert fd_oracle(lambda x, y: 0.0 * x, wg.PLANAR, [0.1, 0.2], (1, 0)) == 0.0


def test_fd_oracle_round_first_derivative():
    f = round_factor()
    val = fd_oracle(lambda x, y: f(x, y), wg.NORTH, [1.0, 0.0], (1, 0), h=1e-3)
    assert val == pytest.approx(-1.0, abs=1e-8)


def test_fd_oracle_round_second_derivative():
    # Taylor of ln(1+r^2): f_xx(0,0) = -2
    f = round_factor()
    val = fd_oracle(lambda x, y: f(x, y), wg.NORTH, [0.0, 0.0], (2, 0), h=1e-3)
    assert val == pytest.approx(-2.0, abs=1e-6)


def test_fd_oracle_rejects_stencil_outside_domain():
    f = hyperbolic_factor()
    with pytest.raises(DomainError):
        fd_oracle(lambda x, y: f(x, y), wg.planar(0.3), [0.2999, 0.0], (1, 0), h=1e-3)


def test_eval_jet_order_gate():
    with pytest.raises(JetOrderError):
        eval_jet(round_factor(), wg.NORTH, [0.0, 0.0], 4)
    with pytest.raises(JetOrderError):
        eval_jet(ConformalMetric(round_factor()), wg.NORTH, [0.0, 0.0], 3)


def test_eval_jet_domain_gate():
    with pytest.raises(DomainError):
        eval_jet(round_factor(), wg.NORTH, [5.0, 0.0], 1)
    with pytest.raises(DomainError):
        eval_jet(hyperbolic_factor(), wg.PLANAR, [0.8, 0.7], 1)


# ----------------------------------------------------------------------
# jets against the finite-difference referee
# ----------------------------------------------------------------------
ANALYTIC_FIELDS = [
    ("round", round_factor(), wg.NORTH),
    ("hyperbolic", hyperbolic_factor(), wg.planar(0.6)),
    ("poly", poly_factor([[0.2, -0.3, 0.1], [0.5, 0.7], [-0.4]]), wg.PLANAR),
]


@pytest.mark.parametrize("name,field,chart", ANALYTIC_FIELDS, ids=[f[0] for f in ANALYTIC_FIELDS])
def test_jets_match_fd_oracle_on_grid(name, field, chart):
    t = np.linspace(-0.45, 0.45, 10)
    worst = 0.0
    for x in t:
        for y in t:
            j = field.jet(chart, [x, y], order=2)
            for idx, val in (
                ((1, 0), j.grad[0]),
                ((0, 1), j.grad[1]),
                ((2, 0), j.hess[0, 0]),
                ((1, 1), j.hess[0, 1]),
                ((0, 2), j.hess[1, 1]),
            ):
                ref = fd_oracle(lambda a, b: field(a, b), chart, [x, y], idx)
                worst = max(worst, abs(val - ref))
    assert worst < 1e-6


def test_third_order_jet_matches_fd():
    field = poly_factor([[0.0, 0.0, 0.0, 0.5], [0.0, 0.0, -0.2], [0.0, 0.3], [0.7]])
    j = field.jet(wg.PLANAR, [0.2, -0.1], order=3)
    ref = fd_oracle(lambda a, b: field(a, b), wg.PLANAR, [0.2, -0.1], (2, 1), h=1e-2)
    assert j.third[0, 0, 1] == pytest.approx(ref, abs=1e-7)


def test_conformal_metric_derivative_identity():
    # dg_ij,m = 2 f_,m g_ij exactly for e^{2f} * identity
    field = ConformalMetric(round_factor())
    for p in ([0.3, 0.4], [-0.8, 0.1], [0.0, -1.2]):
        m = field.jet(wg.NORTH, p, order=1)
        fj = round_factor().jet(wg.NORTH, p, order=1)
        target = 2.0 * np.einsum("m,ij->mij", fj.grad, m.g)
        assert np.max(np.abs(m.dg - target)) < 1e-10


# ----------------------------------------------------------------------
# jet arithmetic properties
# ----------------------------------------------------------------------
coef = st.floats(-2.0, 2.0, allow_nan=False)


@given(arrays(float, (3, 3), elements=coef), arrays(float, (3, 3), elements=coef),
       st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_jet_product_rule(ca, cb, x, y):
    fa = poly_factor(ca.tolist())
    fb = poly_factor(cb.tolist())
    X, Y = Jet2.variables(x, y, 2)
    prod = fa(X, Y) * fb(X, Y)
    a = fa.jet(wg.planar(2.0), [x, y], 2)
    b = fb.jet(wg.planar(2.0), [x, y], 2)
    assert prod.value == pytest.approx(a.value * b.value, abs=1e-12)
    assert np.allclose(prod.grad, a.value * b.grad + b.value * a.grad, atol=1e-11)
    hess = (
        a.value * b.hess
        + b.value * a.hess
        + np.outer(a.grad, b.grad)
        + np.outer(b.grad, a.grad)
    )
    assert np.allclose(prod.hess, hess, atol=1e-10)


@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))
def test_jet_exp_log_roundtrip(x, y):
    X, Y = Jet2.variables(x, y, 3)
    v = (1.0 + X * X + Y * Y).log().exp()
    assert v.value == pytest.approx(1.0 + x * x + y * y, rel=1e-12)
    assert np.allclose(v.grad, [2 * x, 2 * y], atol=1e-10)


def test_jet_deriv_shift():
    field = poly_factor([[0.0, 1.0, 0.5], [2.0, -1.0], [3.0]])
    X, Y = Jet2.variables(0.3, -0.2, 3)
    full = field(X, Y)
    dx = full.deriv(0)
    assert dx.value == pytest.approx(full.grad[0], abs=1e-13)
    assert np.allclose(dx.grad, full.hess[0], atol=1e-12)
