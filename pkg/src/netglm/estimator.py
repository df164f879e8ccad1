"""Subspace-constrained maximum likelihood via iteratively reweighted least squares.

The effective design stacks the rotated covariate basis with the network-only
part of the rotated spectral basis, [Z~ | W~_{(r+1):K}]. Solving the GLM
estimating equation

    S(gamma) = (1/n) sum_i g_i * h'(g_i' gamma) / v(g_i' gamma) * (y_i - h(g_i' gamma)) = 0

on that design and mapping gamma back through the covariate Gram matrix
yields the shared effect theta, the covariate-only effect beta, and the
network-only effect alpha.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError, DomainError, IrlsDivergenceError, NumericalError
from .families import GlmFamily
from .subspace import (
    ADJACENCY_LEADING,
    AlignedBases,
    align_subspaces,
    orthonormal_basis,
    select_r,
    spectral_basis,
)

WEIGHT_FLOOR = 1e-10
SEPARATION_ETA = 30.0


@dataclass(frozen=True)
class EffectiveDesign:
    """Effective GLM design [Z~ | W~_{(r+1):K}] with its dimensions."""

    matrix: np.ndarray
    n: int
    p: int
    K: int
    r: int

    @property
    def width(self) -> int:
        return self.p + self.K - self.r


@dataclass(frozen=True)
class Convergence:
    iterations: int
    score_norm: float
    converged: bool
    step_halvings: int = 0
    separation_flag: bool = False


@dataclass(frozen=True)
class FittedModel:
    """Everything downstream inference needs from one fit."""

    gamma: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    info: np.ndarray  # sample information matrix at gamma
    kappa: np.ndarray  # per-observation weights h'^2 / v at gamma
    gram_inv: np.ndarray  # G = (X'X / n)^{-1}
    eta: np.ndarray
    mu: np.ndarray
    convergence: Convergence
    family: GlmFamily
    design: EffectiveDesign
    bases: AlignedBases
    X: np.ndarray
    n_fit: int = 0  # rows entering the estimating equation (n unless subset)


def build_design(bases: AlignedBases) -> EffectiveDesign:
    r = bases.require_r()
    if r == bases.K and bases.p == 0:
        raise DomainError("effective design is empty (r = K and no covariates)")
    matrix = np.hstack([bases.z, bases.w[:, r:]])
    return EffectiveDesign(matrix=matrix, n=bases.n, p=bases.p, K=bases.K, r=r)


def _design_matrix(design) -> np.ndarray:
    return design.matrix if isinstance(design, EffectiveDesign) else np.asarray(design, dtype=float)


def score(gamma: np.ndarray, design, y: np.ndarray, family: GlmFamily) -> np.ndarray:
    """Sample estimating function S(gamma)."""
    G = _design_matrix(design)
    eta = G @ gamma
    resid = family.dmean(eta) / family.variance(eta) * (y - family.mean(eta))
    if not np.all(np.isfinite(resid)):
        bad = int(np.nonzero(~np.isfinite(resid))[0][0])
        raise NumericalError(f"score evaluation overflowed at row {bad}")
    return G.T @ resid / G.shape[0]


def information(gamma: np.ndarray, design, family: GlmFamily) -> np.ndarray:
    """Sample information matrix F(gamma) = (1/n) sum kappa_i g_i g_i'."""
    G = _design_matrix(design)
    k = kappa_weights(gamma, design, family)
    return (G.T * k) @ G / G.shape[0]


def kappa_weights(gamma: np.ndarray, design, family: GlmFamily) -> np.ndarray:
    G = _design_matrix(design)
    eta = G @ gamma
    return family.dmean(eta) ** 2 / family.variance(eta)


def irls_solve(
    design,
    y: np.ndarray,
    family: GlmFamily,
    tol: float = 1e-8,
    max_iter: int = 100,
    init: np.ndarray | None = None,
    step_tol: float = 1e-10,
) -> tuple[np.ndarray, Convergence]:
    """Fisher-scoring IRLS for the estimating equation.

    Stops when both the relative parameter step falls below ``step_tol`` and
    the sup-norm of the score falls below ``tol``. For natural links the
    log-likelihood is a valid merit function and decreasing steps are halved
    (up to 10 times). Raises IrlsDivergenceError (with the iterate history
    attached) if the budget is exhausted.
    """
    G = _design_matrix(design)
    y = family.validate_response(y)
    n, m = G.shape
    if y.shape[0] != n:
        raise DomainError("response length does not match the design")
    svals = np.linalg.svd(G, compute_uv=False)
    if svals[-1] < 1e-10 * svals[0]:
        raise DegenerateDesignError("effective design is numerically rank deficient")

    gamma = np.zeros(m) if init is None else np.asarray(init, dtype=float).copy()
    eta = G @ gamma
    loglik = family.log_likelihood(y, eta)
    history = []
    total_halvings = 0
    s_norm = np.inf

    for it in range(1, max_iter + 1):
        mu = family.mean(eta)
        hp = family.dmean(eta)
        v = family.variance(eta)
        w = np.maximum(hp**2 / v, WEIGHT_FLOOR)
        z = eta + (y - mu) / np.maximum(hp, WEIGHT_FLOOR)
        sw = np.sqrt(w)
        proposal, *_ = np.linalg.lstsq(G * sw[:, None], sw * z, rcond=None)

        if family.natural_link:
            for _ in range(10):
                cand = family.log_likelihood(y, G @ proposal)
                if cand >= loglik or not np.isfinite(loglik):
                    break
                proposal = 0.5 * (proposal + gamma)
                total_halvings += 1

        step = np.max(np.abs(proposal - gamma)) / max(1.0, np.max(np.abs(gamma)))
        gamma = proposal
        eta = G @ gamma
        loglik = family.log_likelihood(y, eta)
        s_norm = float(np.max(np.abs(score(gamma, G, y, family))))
        history.append((gamma.copy(), loglik, s_norm))

        if step <= step_tol and s_norm <= tol:
            separation = bool(
                family.kind == "bernoulli-logit" and np.max(np.abs(eta)) > SEPARATION_ETA
            )
            if separation:
                warnings.warn(
                    "fitted linear predictor exceeds 30 in magnitude; "
                    "data may be quasi-separated",
                    RuntimeWarning,
                    stacklevel=2,
                )
            return gamma, Convergence(
                iterations=it,
                score_norm=s_norm,
                converged=True,
                step_halvings=total_halvings,
                separation_flag=separation,
            )

    raise IrlsDivergenceError(
        f"IRLS did not converge in {max_iter} iterations (last score norm {s_norm:.3e})",
        history=history,
    )


def back_transform(
    gamma: np.ndarray, X: np.ndarray, bases: AlignedBases
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map gamma back to (theta, beta, alpha) through the aligned bases."""
    r = bases.require_r()
    p, K = bases.p, bases.K
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[0] != p + K - r:
        raise DomainError("gamma length does not match the bases")
    theta = np.zeros(p)
    beta = np.zeros(p)
    if r > 0:
        theta, *_ = np.linalg.lstsq(X, bases.z[:, :r] @ gamma[:r], rcond=None)
    if r < p:
        beta, *_ = np.linalg.lstsq(X, bases.z[:, r:p] @ gamma[r:p], rcond=None)
    alpha = bases.w[:, r:] @ gamma[p:]
    return theta, beta, alpha


def predict(fit: FittedModel, design=None) -> np.ndarray:
    """Fitted means h(g_i' gamma) on the fit's design (or a supplied one)."""
    if not fit.convergence.converged:
        raise NumericalError("cannot predict from a non-converged fit")
    G = _design_matrix(design if design is not None else fit.design)
    return fit.family.mean(G @ fit.gamma)


def fit_subspace_glm(
    X: np.ndarray,
    y: np.ndarray,
    bases: AlignedBases,
    family: GlmFamily,
    tol: float = 1e-8,
    max_iter: int = 100,
    init: np.ndarray | None = None,
    fit_rows: np.ndarray | None = None,
) -> FittedModel:
    """Fit the model on pre-aligned bases and assemble a FittedModel.

    ``fit_rows`` restricts the estimating equation to a row subset (used for
    held-out prediction); the returned linear predictor and means still cover
    all n nodes.
    """
    X = np.asarray(X, dtype=float)
    design = build_design(bases)
    G = design.matrix
    if fit_rows is not None:
        G_fit = G[fit_rows]
        gamma, conv = irls_solve(
            G_fit, np.asarray(y, dtype=float)[fit_rows], family, tol, max_iter, init
        )
    else:
        G_fit = G
        gamma, conv = irls_solve(design, y, family, tol, max_iter, init)
    theta, beta, alpha = back_transform(gamma, X, bases)
    eta = G @ gamma
    gram = X.T @ X / design.n
    return FittedModel(
        gamma=gamma,
        theta=theta,
        beta=beta,
        alpha=alpha,
        info=information(gamma, G_fit, family),
        kappa=kappa_weights(gamma, G_fit, family),
        gram_inv=np.linalg.inv(gram),
        eta=eta,
        mu=family.mean(eta),
        convergence=conv,
        family=family,
        design=design,
        bases=bases,
        X=X,
        n_fit=G_fit.shape[0],
    )


def fit_network_glm(
    X: np.ndarray,
    P_hat: np.ndarray,
    y: np.ndarray,
    family: GlmFamily,
    K: int,
    r: int | str = "auto",
    mode: str = ADJACENCY_LEADING,
    tol: float = 1e-8,
    max_iter: int = 100,
    fit_rows: np.ndarray | None = None,
) -> FittedModel:
    """End-to-end fit from raw inputs: bases, alignment, r selection, IRLS.

    ``r`` is either an integer or "auto", in which case the selection rule is
    applied to the alignment singular values with the relational matrix's
    average total weight.
    """
    X = np.asarray(X, dtype=float)
    P_hat = np.asarray(P_hat, dtype=float)
    z_bar = orthonormal_basis(X)
    basis = spectral_basis(P_hat, K, mode)
    bases = align_subspaces(z_bar, basis.vectors)
    if isinstance(r, str):
        if r != "auto":
            raise DomainError("r must be an integer or 'auto'")
        d_hat = float(P_hat.sum() / P_hat.shape[0])
        r_used = select_r(bases.sigma, d_hat, bases.p, K, bases.n)
    else:
        r_used = int(r)
    return fit_subspace_glm(
        X, y, bases.with_r(r_used), family, tol=tol, max_iter=max_iter, fit_rows=fit_rows
    )
