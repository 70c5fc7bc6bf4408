import numpy as np
import pytest

import weylgeo as wg
from weylgeo.compat import (
    WeylStructureChart,
    construct_beta,
    kappa_residual,
    normalize_representative,
    solve_beta_least_squares,
)
from weylgeo.connections import (
    ConnectionCoeffs,
    epsilon_modification,
    levi_civita,
    projective_invariants,
    projectively_equivalent,
    weyl_connection,
)
from weylgeo.errors import IncompatibleStructureError
from weylgeo.fields import (
    ConformalMetric,
    MetricJet,
    OneFormJet,
    flat_factor,
    poly_one_form,
    round_factor,
)

IDENTITY = MetricJet(g=np.eye(2), dg=np.zeros((2, 2, 2)))
GAMMA122 = np.zeros((2, 2, 2))
GAMMA122[0, 1, 1] = 1.0


# ----------------------------------------------------------------------
# kappa residual
# ----------------------------------------------------------------------
def test_residual_vanishes_for_own_lc():
    factor = round_factor()
    metric = ConformalMetric(factor)
    for p in ([0.0, 0.0], [0.5, -0.8], [1.2, 0.3]):
        fj = factor.jet(wg.NORTH, p, 1)
        res = kappa_residual(fj, levi_civita(metric.jet(wg.NORTH, p, 1)))
        assert np.max(np.abs(res)) < 1e-13


def test_residual_zero_connection():
    fj = round_factor().jet(wg.NORTH, [0.3, 0.3], 1)
    res = kappa_residual(fj, ConnectionCoeffs(np.zeros((2, 2, 2))))
    assert np.allclose(res, 0.0)


def test_residual_gamma122_only():
    # kappa3 = -1, kappa1 = 0 -> residual (1, 0)
    fj = flat_factor().jet(wg.PLANAR, [0.0, 0.0], 1)
    res = kappa_residual(fj, ConnectionCoeffs(GAMMA122))
    assert np.allclose(res.ravel(), [1.0, 0.0])


# ----------------------------------------------------------------------
# construct_beta
# ----------------------------------------------------------------------
def test_beta_vanishes_for_own_lc():
    factor = round_factor()
    metric = ConformalMetric(factor)
    fj = factor.jet(wg.NORTH, [0.7, -0.1], 1)
    bj = construct_beta(fj, levi_civita(metric.jet(wg.NORTH, [0.7, -0.1], 1)))
    assert np.max(np.abs(bj.b)) < 1e-13


def test_beta_trivial_case():
    fj = flat_factor().jet(wg.PLANAR, [0.1, 0.1], 1)
    bj = construct_beta(fj, ConnectionCoeffs(np.zeros((2, 2, 2))))
    assert np.allclose(bj.b, 0.0)


def test_beta_recovers_weyl_form():
    # weyl(identity, dx) has kappa3 = -1, kappa0 = 0, so beta = dx
    fj = flat_factor().jet(wg.PLANAR, [0.0, 0.0], 1)
    cw = weyl_connection(IDENTITY, OneFormJet(b=np.array([1.0, 0.0])))
    bj = construct_beta(fj, cw)
    assert np.allclose(bj.b, [1.0, 0.0], atol=1e-14)


def test_beta_rejects_incompatible_input():
    fj = flat_factor().jet(wg.PLANAR, [0.0, 0.0], 1)
    with pytest.raises(IncompatibleStructureError):
        construct_beta(fj, ConnectionCoeffs(GAMMA122))


def test_constructed_pair_is_projectively_correct(rng):
    # weyl(e^{2f} id, constructed beta) matches the target class
    from weylgeo.fields import random_poly_factor

    factor = random_poly_factor(rng, degree=4, scale=0.15)
    metric = ConformalMetric(factor)
    target_beta = poly_one_form([[0.1, -0.2]], [[0.3], [0.05]])
    for _ in range(6):
        p = rng.uniform(-0.8, 0.8, 2)
        m = metric.jet(wg.PLANAR, p, 1)
        proj = weyl_connection(m, target_beta.jet(wg.PLANAR, p, 0))
        fj = factor.jet(wg.PLANAR, p, 1)
        bj = construct_beta(fj, proj)
        rebuilt = weyl_connection(m, bj)
        res = projectively_equivalent(rebuilt, proj, tol=1e-8)
        assert res.equivalent, res.pi_gap


# ----------------------------------------------------------------------
# least-squares route
# ----------------------------------------------------------------------
def test_ls_exact_roundtrip():
    target = projective_invariants(
        weyl_connection(IDENTITY, OneFormJet(b=np.array([1.0, 0.0])))
    )
    sol = solve_beta_least_squares(IDENTITY, target)
    assert np.allclose(sol.beta, [1.0, 0.0], atol=1e-12)
    assert sol.residual < 1e-12


def test_ls_trivial():
    target = projective_invariants(ConnectionCoeffs(np.zeros((2, 2, 2))))
    sol = solve_beta_least_squares(IDENTITY, target)
    assert np.allclose(sol.beta, 0.0, atol=1e-14)
    assert sol.residual < 1e-14


def test_ls_detects_obstruction():
    target = projective_invariants(ConnectionCoeffs(GAMMA122))
    sol = solve_beta_least_squares(IDENTITY, target)
    assert sol.residual > 0.1


def test_ls_residual_blind_to_epsilon(rng):
    base = ConnectionCoeffs(GAMMA122)
    t0 = projective_invariants(base)
    s0 = solve_beta_least_squares(IDENTITY, t0)
    for _ in range(10):
        shifted = epsilon_modification(base, rng.uniform(-1, 1, 2))
        s1 = solve_beta_least_squares(IDENTITY, projective_invariants(shifted))
        assert s1.residual == pytest.approx(s0.residual, abs=1e-12)
        assert np.allclose(s1.beta, s0.beta, atol=1e-12)


def test_ls_agrees_with_isothermal_route(rng):
    # both routes applied to the det-1 representative give the same beta
    factor = flat_factor()
    target_beta = poly_one_form([[0.2], [-0.1]], [[0.0, 0.25]])
    for _ in range(8):
        p = rng.uniform(-0.8, 0.8, 2)
        m = ConformalMetric(factor).jet(wg.PLANAR, p, 1)
        proj = weyl_connection(m, target_beta.jet(wg.PLANAR, p, 0))
        fj = factor.jet(wg.PLANAR, p, 1)
        b_iso = construct_beta(fj, proj).b
        b_ls = solve_beta_least_squares(m, projective_invariants(proj)).beta
        assert np.max(np.abs(b_iso - b_ls)) < 1e-8


def test_ls_unique_beta_from_two_representatives(rng):
    metric = ConformalMetric(round_factor())
    beta = poly_one_form([[0.1], [0.3]], [[-0.2]])
    p = [0.4, 0.6]
    m = metric.jet(wg.NORTH, p, 1)
    proj = weyl_connection(m, beta.jet(wg.NORTH, p, 0))
    other = epsilon_modification(proj, [0.7, -0.4])
    s1 = solve_beta_least_squares(m, projective_invariants(proj))
    s2 = solve_beta_least_squares(m, projective_invariants(other))
    assert np.max(np.abs(s1.beta - s2.beta)) < 1e-10


def test_ls_normal_equations_never_singular(rng):
    # positive definite metric => full-rank design matrix
    from weylgeo.compat import _beta_design

    for _ in range(200):
        a = rng.uniform(-1.0, 1.0, (2, 2))
        g = a @ a.T + 0.05 * np.eye(2)
        A = _beta_design(g)
        s = np.linalg.svd(A, compute_uv=False)
        assert s[-1] > 1e-6


# ----------------------------------------------------------------------
# representative normalization
# ----------------------------------------------------------------------
def test_det1_mode_round_metric():
    # (e^{2f} id, 0) with the round factor -> (id, -df)
    w = WeylStructureChart(
        metric=ConformalMetric(round_factor()), beta=poly_one_form([[0.0]], [[0.0]]),
        chart=wg.NORTH,
    )
    nw = normalize_representative(w, mode="det1")
    p = [0.6, -0.3]
    m = nw.metric.jet(wg.NORTH, p, 1)
    assert np.allclose(m.g, np.eye(2), atol=1e-12)
    fj = round_factor().jet(wg.NORTH, p, 1)
    bj = nw.beta.jet(wg.NORTH, p, 1)
    assert np.allclose(bj.b, -fj.grad, atol=1e-12)


def test_det1_mode_preserves_connection():
    w = WeylStructureChart(
        metric=ConformalMetric(round_factor()),
        beta=poly_one_form([[0.2], [0.1]], [[0.3]]),
        chart=wg.NORTH,
    )
    nw = normalize_representative(w, mode="det1")
    for p in ([0.2, 0.2], [-0.7, 0.5]):
        c1 = w.connection_at(p)
        c2 = nw.connection_at(p)
        assert np.max(np.abs(c1.gamma - c2.gamma)) < 1e-10


def test_det1_identity_unchanged_and_idempotent():
    w = WeylStructureChart(
        metric=ConformalMetric(flat_factor()),
        beta=poly_one_form([[0.1]], [[0.0, 0.4]]),
        chart=wg.PLANAR,
    )
    n1 = normalize_representative(w, "det1")
    n2 = normalize_representative(n1, "det1")
    p = [0.3, -0.2]
    assert np.allclose(n1.metric.jet(wg.PLANAR, p, 0).g, np.eye(2), atol=1e-14)
    assert np.allclose(
        n1.beta.jet(wg.PLANAR, p, 0).b, n2.beta.jet(wg.PLANAR, p, 0).b, atol=1e-14
    )
    assert np.allclose(n1.beta.jet(wg.PLANAR, p, 0).b, w.beta.jet(wg.PLANAR, p, 0).b)
