"""Torsion-free connection coefficients and their projective invariants.

Index conventions: gamma[i, k, l] carries the upper index first and is
symmetric in (k, l).  The four kappa functions encode the trace-free
invariant tensor in a fixed chart:

    kappa0 = Gamma^2_11            3*kappa1 = -Gamma^1_11 + 2*Gamma^2_12
    kappa3 = -Gamma^1_22           3*kappa2 = -2*Gamma^1_12 + Gamma^2_22

and the invariant tensor satisfies pi[0,0,0] = -kappa1, pi[0,0,1] = -kappa2,
pi[0,1,1] = -kappa3, pi[1,0,0] = kappa0, pi[1,0,1] = kappa1,
pi[1,1,1] = kappa2 (checked as a test invariant, not assumed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .fields import MetricJet, OneFormJet

_SYM_TOL = 1e-9


@dataclass
class ConnectionCoeffs:
    gamma: np.ndarray  # (2, 2, 2)
    dgamma: np.ndarray | None = None  # (2, 2, 2, 2), dgamma[m] = d_m gamma

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.shape != (2, 2, 2):
            raise GeometryError("connection coefficients must be a (2,2,2) array")
        if np.max(np.abs(g - np.swapaxes(g, 1, 2))) > _SYM_TOL:
            raise GeometryError("connection must be symmetric in the lower indices")
        self.gamma = 0.5 * (g + np.swapaxes(g, 1, 2))
        if self.dgamma is not None:
            d = np.asarray(self.dgamma, dtype=float)
            self.dgamma = 0.5 * (d + np.swapaxes(d, 2, 3))


@dataclass
class ProjectiveData:
    pi: np.ndarray  # (2, 2, 2), trace-free
    kappa: np.ndarray  # (4,)


@dataclass
class EpsilonForm:
    e: np.ndarray

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=float).reshape(2)


@dataclass
class EquivalenceResult:
    equivalent: bool
    epsilon: EpsilonForm
    pi_gap: float


# ----------------------------------------------------------------------
# vectorized cores (leading batch axes allowed everywhere)
# ----------------------------------------------------------------------
def lc_gamma(g, dg):
    """Levi-Civita coefficients from metric values and first derivatives."""
    ginv = np.linalg.inv(g)
    term = (
        np.einsum("...lmk->...mkl", dg)
        + np.einsum("...kml->...mkl", dg)
        - dg
    )
    return 0.5 * np.einsum("...im,...mkl->...ikl", ginv, term)


def weyl_gamma(g, b_lower):
    """The beta-dependent part of the Weyl connection: g_kl b^i - b_k d^i_l - b_l d^i_k."""
    binv = np.einsum("...ij,...j->...i", np.linalg.inv(g), b_lower)
    eye = np.eye(2)
    out = np.einsum("...kl,...i->...ikl", g, binv)
    out -= np.einsum("...k,il->...ikl", b_lower, eye)
    out -= np.einsum("...l,ik->...ikl", b_lower, eye)
    return out


def kappa_of_gamma(gamma):
    k0 = gamma[..., 1, 0, 0]
    k1 = (-gamma[..., 0, 0, 0] + 2.0 * gamma[..., 1, 0, 1]) / 3.0
    k2 = (-2.0 * gamma[..., 0, 0, 1] + gamma[..., 1, 1, 1]) / 3.0
    k3 = -gamma[..., 0, 1, 1]
    return np.stack([k0, k1, k2, k3], axis=-1)


def pi_of_gamma(gamma):
    tr = np.einsum("...jjl->...l", gamma)
    eye = np.eye(2)
    return (
        gamma
        - (np.einsum("ik,...l->...ikl", eye, tr) + np.einsum("il,...k->...ikl", eye, tr)) / 3.0
    )


def pi_norm(kappa_gap):
    """Frobenius norm of the full invariant tensor built from a kappa gap."""
    k0, k1, k2, k3 = np.moveaxis(np.asarray(kappa_gap, dtype=float), -1, 0)
    return np.sqrt(k0**2 + 3.0 * k1**2 + 3.0 * k2**2 + k3**2)


# ----------------------------------------------------------------------
# pointwise operations
# ----------------------------------------------------------------------
def levi_civita(m: MetricJet) -> ConnectionCoeffs:
    """Levi-Civita connection of a metric jet (needs first derivatives)."""
    if m.dg is None:
        raise GeometryError("levi_civita needs metric first derivatives")
    gamma = lc_gamma(m.g, m.dg)
    dgamma = None
    if m.d2g is not None:
        ginv = m.inv
        dginv = -np.einsum("ia,mab,bj->mij", ginv, m.dg, ginv)
        term = (
            np.einsum("lmk->mkl", m.dg) + np.einsum("kml->mkl", m.dg) - m.dg
        )
        dterm = (
            np.einsum("nlmk->nmkl", m.d2g)
            + np.einsum("nkml->nmkl", m.d2g)
            - np.einsum("nmkl->nmkl", m.d2g)
        )
        dgamma = 0.5 * (
            np.einsum("nim,mkl->nikl", dginv, term)
            + np.einsum("im,nmkl->nikl", ginv, dterm)
        )
    return ConnectionCoeffs(gamma=gamma, dgamma=dgamma)


def weyl_connection(m: MetricJet, beta: OneFormJet) -> ConnectionCoeffs:
    """Weyl connection of the pair (g, beta): Levi-Civita plus the beta terms."""
    base = levi_civita(m)
    gamma = base.gamma + weyl_gamma(m.g, beta.b)
    dgamma = None
    if base.dgamma is not None and beta.db is not None:
        ginv = m.inv
        dginv = -np.einsum("ia,mab,bj->mij", ginv, m.dg, ginv)
        b_up = ginv @ beta.b
        db_up = np.einsum("mij,j->mi", dginv, beta.b) + np.einsum(
            "ij,mj->mi", ginv, beta.db
        )
        eye = np.eye(2)
        extra = np.einsum("mkl,i->mikl", m.dg, b_up)
        extra += np.einsum("kl,mi->mikl", m.g, db_up)
        extra -= np.einsum("mk,il->mikl", beta.db, eye)
        extra -= np.einsum("ml,ik->mikl", beta.db, eye)
        dgamma = base.dgamma + extra
    return ConnectionCoeffs(gamma=gamma, dgamma=dgamma)


def projective_invariants(c: ConnectionCoeffs) -> ProjectiveData:
    return ProjectiveData(pi=pi_of_gamma(c.gamma), kappa=kappa_of_gamma(c.gamma))


def epsilon_modification(c: ConnectionCoeffs, eps) -> ConnectionCoeffs:
    """Add eps_k delta^i_l + eps_l delta^i_k; preserves all invariants."""
    e = eps.e if isinstance(eps, EpsilonForm) else np.asarray(eps, dtype=float)
    eye = np.eye(2)
    shift = np.einsum("k,il->ikl", e, eye) + np.einsum("l,ik->ikl", e, eye)
    return ConnectionCoeffs(gamma=c.gamma + shift)


def recover_epsilon(c1: ConnectionCoeffs, c2: ConnectionCoeffs) -> EpsilonForm:
    tr1 = np.einsum("jjl->l", c1.gamma)
    tr2 = np.einsum("jjl->l", c2.gamma)
    return EpsilonForm(e=(tr2 - tr1) / 3.0)


def projectively_equivalent(c1, c2, tol=1e-9) -> EquivalenceResult:
    """Same unparametrized geodesics iff the invariant tensors coincide."""
    gap = float(np.max(np.abs(pi_of_gamma(c1.gamma) - pi_of_gamma(c2.gamma))))
    return EquivalenceResult(
        equivalent=gap <= tol, epsilon=recover_epsilon(c1, c2), pi_gap=gap
    )


def nabla_g_residual(m: MetricJet, beta: OneFormJet, c: ConnectionCoeffs) -> float:
    """Sup norm of nabla g - 2 beta (x) g, the defining property of the pair."""
    if m.dg is None:
        raise GeometryError("residual needs metric first derivatives")
    nab = (
        m.dg
        - np.einsum("kmi,kj->mij", c.gamma, m.g)
        - np.einsum("kmj,ik->mij", c.gamma, m.g)
    )
    target = 2.0 * np.einsum("m,ij->mij", beta.b, m.g)
    return float(np.max(np.abs(nab - target)))


def conformal_lc_coeffs(fx, fy):
    """Levi-Civita coefficients of e^{2f} * identity from grad f (batch-safe)."""
    fx = np.asarray(fx, dtype=float)
    fy = np.asarray(fy, dtype=float)
    gamma = np.zeros(fx.shape + (2, 2, 2))
    gamma[..., 0, 0, 0] = fx
    gamma[..., 0, 0, 1] = gamma[..., 0, 1, 0] = fy
    gamma[..., 0, 1, 1] = -fx
    gamma[..., 1, 0, 0] = -fy
    gamma[..., 1, 0, 1] = gamma[..., 1, 1, 0] = fx
    gamma[..., 1, 1, 1] = fy
    return gamma
