"""Named invariant suites runnable from the CLI.

Each check returns a measured residual and its tolerance; a suite report is
a deterministic JSON document (fixed seed in, identical bytes out).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import charts, compat, conics, connections, fields, finsler
from .charts import GNOMONIC, NORTH, PLANAR, SOUTH, transition
from .errors import GeometryError
from .jets import fd_oracle


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self):
        return self.residual <= self.tolerance

    def to_json_dict(self):
        return {
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
        }


def _check_transitions(rng):
    worst = 0.0
    for _ in range(40):
        p = rng.uniform(0.7, 1.4, 2) * rng.choice([-1.0, 1.0], 2)
        q, _ = transition(NORTH, SOUTH, p)
        back, _ = transition(SOUTH, NORTH, q)
        worst = max(worst, float(np.max(np.abs(back - p))))
    return CheckResult("chart-transition-roundtrip", worst, 1e-12)


def _check_jets_vs_fd(rng):
    f = fields.round_factor()
    worst = 0.0
    for _ in range(20):
        p = rng.uniform(-0.9, 0.9, 2)
        j = f.jet(NORTH, p, order=2)
        for idx, val in (
            ((1, 0), j.grad[0]),
            ((0, 1), j.grad[1]),
            ((2, 0), j.hess[0, 0]),
            ((1, 1), j.hess[0, 1]),
        ):
            ref = fd_oracle(lambda x, y: f(x, y), NORTH, p, idx)
            worst = max(worst, abs(val - ref))
    return CheckResult("jet-vs-fd-oracle", worst, 1e-6)


def _check_pi_invariance(rng):
    worst = 0.0
    for _ in range(100):
        gamma = rng.uniform(-1, 1, (2, 2, 2))
        c = connections.ConnectionCoeffs(0.5 * (gamma + np.swapaxes(gamma, 1, 2)))
        eps = rng.uniform(-1, 1, 2)
        c2 = connections.epsilon_modification(c, eps)
        gap = np.max(
            np.abs(
                connections.projective_invariants(c).pi
                - connections.projective_invariants(c2).pi
            )
        )
        worst = max(worst, float(gap))
    return CheckResult("invariant-epsilon-independence", worst, 1e-12)


def _check_epsilon_recovery(rng):
    worst = 0.0
    for _ in range(100):
        gamma = rng.uniform(-1, 1, (2, 2, 2))
        c = connections.ConnectionCoeffs(0.5 * (gamma + np.swapaxes(gamma, 1, 2)))
        eps = rng.uniform(-1, 1, 2)
        c2 = connections.epsilon_modification(c, eps)
        rec = connections.recover_epsilon(c, c2).e
        worst = max(worst, float(np.max(np.abs(rec - eps))))
    return CheckResult("epsilon-recovery", worst, 1e-12)


def _check_isothermal_identity(rng):
    worst = 0.0
    for factor in (fields.round_factor(), fields.random_poly_factor(rng)):
        metric = fields.ConformalMetric(factor)
        for _ in range(25):
            p = rng.uniform(-0.9, 0.9, 2)
            fj = factor.jet(NORTH, p, order=1)
            conn = connections.levi_civita(metric.jet(NORTH, p, order=1))
            res = compat.kappa_residual(fj, conn)
            worst = max(worst, float(np.max(np.abs(res))))
    return CheckResult("isothermal-self-compatibility", worst, 1e-10)


def _check_decode_oracle(rng):
    worst = conic_decode_gap(rng, n=100)
    return CheckResult("decode-vs-jet-metric-oracle", worst, 1e-10)


def conic_decode_gap(rng, n=100):
    """decode(tau(g)) against the pushforward-jet Gram route (independent)."""
    worst = 0.0
    for _ in range(n):
        g = rng.standard_normal((3, 3))
        while abs(np.linalg.det(g)) < 0.2:
            g = rng.standard_normal((3, 3))
        g = g / np.cbrt(np.linalg.det(g))
        z = conics.tau(g)
        dec = conics.decode_conformal(z)
        u = g[:, 0] / np.linalg.norm(g[:, 0])
        a1, a2 = conics.sphere_basis(u)
        # pushforward of the two jet directions, projected to u-perp
        w = [
            (g[:, k] - u * (u @ g[:, k])) / np.linalg.norm(g[:, 0])
            for k in (1, 2)
        ]
        J = np.array([[a1 @ w[0], a1 @ w[1]], [a2 @ w[0], a2 @ w[1]]])
        Jin = np.linalg.inv(J)
        G = Jin.T @ Jin
        G = G / np.sqrt(np.linalg.det(G))
        worst = max(worst, float(np.max(np.abs(G - dec.G))))
    return worst


def _check_fiber_identity(rng):
    th = np.linspace(0.05, np.pi - 0.05, 20)
    ph = np.linspace(0.0, 2 * np.pi, 40, endpoint=False)
    conic = conics.Conic.from_complex(np.diag([1.0, 2.0, 3.0]))
    worst = 0.0
    for t in th:
        for p in ph:
            u = np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
            z = conics.fiber_section(conic, u)
            worst = max(worst, float(np.max(np.abs(conics.rho(z) - u))))
    return CheckResult("fiber-section-base-identity", worst, 1e-9)


def _check_area_identity(rng):
    pairs = [
        (fields.round_factor(), fields.zero_one_form(), NORTH),
        (fields.round_factor(), fields.poly_one_form([[0.0], [0.3]], [[0.1]]), NORTH),
        (
            fields.bump_factor(0.25, 0.9),
            fields.poly_one_form([[0.0, 0.2]], [[0.0], [0.15]]),
            PLANAR,
        ),
    ]
    worst = 0.0
    for factor, beta, chart in pairs:
        data = finsler.ConformalWeylData(factor, beta, atlas=(chart,))
        for _ in range(10):
            p = rng.uniform(-0.6, 0.6, 2)
            u = finsler.UTBPoint(chart, p, rng.uniform(0, 2 * np.pi))
            worst = max(worst, finsler.area_identity_residual(data, u))
    return CheckResult("area-sign-identity", worst, 1e-5)


_IDENTITY_CHECKS = (
    _check_transitions,
    _check_jets_vs_fd,
    _check_pi_invariance,
    _check_epsilon_recovery,
    _check_isothermal_identity,
    _check_decode_oracle,
    _check_fiber_identity,
    _check_area_identity,
)

SUITES = {"identities": _IDENTITY_CHECKS}


def run_suite(name, seed=0):
    if name not in SUITES:
        raise GeometryError(f"unknown suite {name!r}; have {sorted(SUITES)}")
    rng = np.random.default_rng(seed)
    return [chk(rng) for chk in SUITES[name]]
