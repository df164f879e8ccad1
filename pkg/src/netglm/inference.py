"""Asymptotic tests for the fitted effects.

The network-effect test is a chi-square quadratic form in alpha-hat whose
kernel annihilates the covariate subspace in the kappa-weighted inner
product. Wald tests for linear functionals of beta and theta use diagonal
blocks of the inverse sample information matrix; each result also reports
the projected-design norm whose positivity the asymptotics require.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import chi2, norm

from .errors import CollinearityError, DegenerateFunctionalError, DomainError
from .estimator import FittedModel
from .subspace import AlignedBases

CONDITION_TOL = 1e-8


@dataclass(frozen=True)
class ChiSqResult:
    statistic: float
    df: int
    p_value: float


@dataclass(frozen=True)
class WaldResult:
    estimate: float
    se: float
    z: float
    p_value: float
    ci95: tuple[float, float]
    condition_value: float


def o_tilde(kappa: np.ndarray, z_tilde: np.ndarray) -> np.ndarray:
    """Weighted annihilator of the covariate space.

        O = n^{-1} (K - K Z (Z' K Z)^{-1} Z' K),   K = diag(kappa)

    Symmetric PSD with O @ Z = 0.
    """
    kappa = np.asarray(kappa, dtype=float)
    z_tilde = np.asarray(z_tilde, dtype=float)
    n = kappa.shape[0]
    if np.any(kappa <= 0):
        raise DomainError("kappa weights must be positive")
    if z_tilde.shape[1] == 0:
        return np.diag(kappa) / n
    kz = kappa[:, None] * z_tilde
    inner = z_tilde.T @ kz
    try:
        c, low = scipy.linalg.cho_factor(inner)
        solved = scipy.linalg.cho_solve((c, low), kz.T)
    except scipy.linalg.LinAlgError as exc:
        raise CollinearityError("Z' K Z is singular; covariate columns are collinear") from exc
    out = np.diag(kappa) - kz @ solved
    return 0.5 * (out + out.T) / n


def network_effect_test(
    alpha_hat: np.ndarray,
    o_matrix: np.ndarray,
    K: int,
    r: int,
    alpha_star: np.ndarray | None = None,
    w_tail: np.ndarray | None = None,
) -> ChiSqResult:
    """Chi-square test of the pure network effect.

    Under the null alpha* = 0 the statistic is n * alpha' O alpha with K - r
    degrees of freedom. In simulation mode, where the true alpha* is known,
    pass ``alpha_star`` together with the network-only basis block ``w_tail``
    (n x (K - r), sqrt(n)-scaled) to use the centered form.
    """
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    n = alpha_hat.shape[0]
    df = K - r
    if df < 1:
        raise DomainError("no network component to test (K = r)")
    centered = alpha_hat
    if alpha_star is not None:
        if w_tail is None:
            raise DomainError("centered test requires the network basis block w_tail")
        centered = alpha_hat - w_tail @ (w_tail.T @ np.asarray(alpha_star, dtype=float)) / n
    stat = float(n * centered @ o_matrix @ centered)
    return ChiSqResult(statistic=stat, df=df, p_value=float(chi2.sf(stat, df)))


def network_effect_test_fit(
    fit: FittedModel, alpha_star: np.ndarray | None = None
) -> ChiSqResult:
    """Network-effect test computed directly from a fitted model.

    Algebraically identical to forming the annihilator: the quadratic form in
    alpha-hat equals n_fit * c' S c where c is the network block of gamma-hat
    and S is the Schur complement of the covariate block in n_fit * F.
    """
    p, K, r = fit.design.p, fit.design.K, fit.design.r
    df = K - r
    if df < 1:
        raise DomainError("no network component to test (K = r)")
    c = fit.gamma[p:]
    if alpha_star is not None:
        w_tail = fit.bases.w[:, r:]
        c = c - w_tail.T @ np.asarray(alpha_star, dtype=float) / fit.bases.n
    F = fit.info
    A = F[:p, :p]
    B = F[:p, p:]
    D = F[p:, p:]
    try:
        cf = scipy.linalg.cho_factor(A)
        schur = D - B.T @ scipy.linalg.cho_solve(cf, B)
    except scipy.linalg.LinAlgError as exc:
        raise CollinearityError("information matrix covariate block is singular") from exc
    stat = float(fit.n_fit * c @ schur @ c)
    return ChiSqResult(statistic=stat, df=df, p_value=float(chi2.sf(stat, df)))


def _info_inverse_block(fit: FittedModel, which: str) -> np.ndarray:
    """Diagonal block of the inverse information matrix for one effect."""
    p, K, r = fit.design.p, fit.design.K, fit.design.r
    f_inv = np.linalg.inv(fit.info)
    if which == "theta":
        return f_inv[:r, :r]
    if which == "beta":
        return f_inv[r:p, r:p]
    return f_inv[p:, p:]


def coef_test(
    u: np.ndarray, which: str, fit: FittedModel, bases: AlignedBases | None = None
) -> WaldResult:
    """Wald test and 95% CI for u' beta or u' theta (u a unit p-vector).

    ``condition_value`` reports n^{-1} || Z-block' X G u ||; the normal
    approximation is meaningful only when it is bounded away from zero, and
    values below 1e-8 raise DegenerateFunctionalError.
    """
    bases = bases if bases is not None else fit.bases
    u = np.asarray(u, dtype=float)
    p, r = bases.p, bases.require_r()
    n = bases.n
    if u.shape != (p,):
        raise DomainError(f"u must be a p-vector (p={p})")
    if not np.isclose(np.linalg.norm(u), 1.0, atol=1e-8):
        raise DomainError("u must be a unit vector")
    if which == "beta":
        if r >= p:
            raise DomainError("no covariate-only block to test (r = p)")
        block = bases.z[:, r:p]
        estimate = float(u @ fit.beta)
    elif which == "theta":
        if r < 1:
            raise DomainError("no shared block to test (r = 0)")
        block = bases.z[:, :r]
        estimate = float(u @ fit.theta)
    else:
        raise DomainError(f"unknown effect {which!r}; expected beta or theta")

    a = block.T @ (fit.X @ (fit.gram_inv @ u))
    condition_value = float(np.linalg.norm(a) / n)
    if condition_value < CONDITION_TOL:
        raise DegenerateFunctionalError(
            f"projected design for this functional is degenerate "
            f"(condition value {condition_value:.2e})"
        )
    f_block = _info_inverse_block(fit, which)
    se = float(np.sqrt(a @ f_block @ a) / (n * np.sqrt(fit.n_fit)))
    z = estimate / se
    return WaldResult(
        estimate=estimate,
        se=se,
        z=z,
        p_value=float(2.0 * norm.sf(abs(z))),
        ci95=(estimate - 1.96 * se, estimate + 1.96 * se),
        condition_value=condition_value,
    )
