"""Spectral bases, subspace alignment, and the intersection-dimension rule.

The pipeline here covers the first two model-fitting stages: orthonormalize
the covariates, extract the K-dimensional spectral subspace of the relational
matrix, rotate both bases through the SVD of their cross product so that the
leading directions line up (the singular values are the cosines of the
principal angles between the two subspaces), and pick the dimension r of the
shared subspace. A perturbation diagnostic compares estimated and oracle
network projections.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DegenerateDesignError, DomainError, EmptyNetworkError

ADJACENCY_LEADING = "adjacency-leading"
LAPLACIAN_SMALLEST = "laplacian-smallest"

_GAP_TOL = 1e-10


def _fix_column_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's largest-magnitude entry is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


@dataclass(frozen=True)
class SpectralBasis:
    """K orthonormal eigenvectors of a symmetric relational matrix.

    ``mode`` selects between the K largest algebraic eigenvalues of the
    matrix itself and the K smallest eigenvalues of its Laplacian D - P.
    ``degenerate_gap`` records a (non-fatal) tie between eigenvalue K and
    K+1, in which case the returned subspace is numerically ill-determined.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray
    mode: str
    degenerate_gap: bool = False


@dataclass(frozen=True)
class AlignedBases:
    """Rotated covariate/network bases and their alignment singular values.

    ``z`` (n x p) and ``w`` (n x K) have columns of norm sqrt(n); sigma holds
    the min(p, K) principal-angle cosines padded with zeros to length K.
    ``r`` is the selected intersection dimension (None until set).
    """

    z: np.ndarray
    w: np.ndarray
    sigma: np.ndarray
    n: int
    p: int
    K: int
    r: int | None = field(default=None)

    def with_r(self, r: int) -> "AlignedBases":
        r = int(r)
        if r < 0 or r > min(self.p, self.K):
            raise DomainError(f"r={r} must lie in [0, min(p, K)={min(self.p, self.K)}]")
        return replace(self, r=r)

    def require_r(self) -> int:
        if self.r is None:
            raise DomainError("intersection dimension r has not been set on these bases")
        return self.r


def orthonormal_basis(X: np.ndarray) -> np.ndarray:
    """Orthonormal basis of col(X) via Householder QR (Gram-Schmidt order).

    Raises DegenerateDesignError when the smallest singular value of X falls
    below 1e-10 times the largest.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError("design matrix must be 2-dimensional")
    n, p = X.shape
    if n < p:
        raise DegenerateDesignError(f"need n >= p, got n={n}, p={p}")
    svals = scipy.linalg.svdvals(X)
    if svals[-1] < 1e-10 * svals[0]:
        raise DegenerateDesignError(
            f"design is rank deficient: singular values range "
            f"[{svals[-1]:.3e}, {svals[0]:.3e}]"
        )
    Q, R = np.linalg.qr(X)
    # normalize LAPACK's sign convention to the Gram-Schmidt one
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def spectral_basis(P_hat: np.ndarray, K: int, mode: str = ADJACENCY_LEADING) -> SpectralBasis:
    """K-dimensional spectral basis of a symmetric relational matrix.

    adjacency-leading: unit eigenvectors for the K largest algebraic
    eigenvalues of P_hat, eigenvalues descending. laplacian-smallest: the K
    smallest eigenvalues of D - P_hat, ascending. Column signs are fixed so
    the output is deterministic.
    """
    P_hat = np.asarray(P_hat, dtype=float)
    n = P_hat.shape[0]
    if P_hat.ndim != 2 or P_hat.shape[1] != n:
        raise DomainError("relational matrix must be square")
    if not (1 <= K < n):
        raise DomainError(f"need 1 <= K < n, got K={K}, n={n}")
    if mode not in (ADJACENCY_LEADING, LAPLACIAN_SMALLEST):
        raise DomainError(f"unknown spectral mode {mode!r}")

    M = 0.5 * (P_hat + P_hat.T)
    if mode == LAPLACIAN_SMALLEST:
        M = np.diag(M.sum(axis=1)) - M
        lo, hi = 0, K  # one extra eigenvalue for the gap check
        vals, vecs = scipy.linalg.eigh(M, subset_by_index=[lo, min(hi, n - 1)])
        gap_pair = (vals[K - 1], vals[K]) if K < n else None
        vals, vecs = vals[:K], vecs[:, :K]
    else:
        vals, vecs = scipy.linalg.eigh(M, subset_by_index=[max(n - K - 1, 0), n - 1])
        vals, vecs = vals[::-1], vecs[:, ::-1]
        gap_pair = (vals[K - 1], vals[K]) if vals.size > K else None
        vals, vecs = vals[:K], vecs[:, :K]

    degenerate = gap_pair is not None and abs(gap_pair[0] - gap_pair[1]) <= _GAP_TOL
    if degenerate:
        warnings.warn(
            f"eigenvalues {K} and {K + 1} coincide to {_GAP_TOL:g}; "
            "the spectral basis is not uniquely determined",
            RuntimeWarning,
            stacklevel=2,
        )
    return SpectralBasis(
        vectors=_fix_column_signs(vecs),
        eigenvalues=np.array(vals, dtype=float),
        mode=mode,
        degenerate_gap=bool(degenerate),
    )


def align_subspaces(z_bar: np.ndarray, w_breve: np.ndarray) -> AlignedBases:
    """Rotate both bases through the SVD of ``z_bar.T @ w_breve``.

    Returns bases scaled by sqrt(n) so columns have squared norm n, with
    singular values clipped into [0, 1]. r is left unset.
    """
    z_bar = np.asarray(z_bar, dtype=float)
    w_breve = np.asarray(w_breve, dtype=float)
    if z_bar.shape[0] != w_breve.shape[0]:
        raise DomainError("bases must share the same number of rows")
    n, p = z_bar.shape
    K = w_breve.shape[1]
    for name, B in (("covariate", z_bar), ("network", w_breve)):
        gram = B.T @ B
        if not np.allclose(gram, np.eye(B.shape[1]), atol=1e-8):
            raise DomainError(f"{name} basis does not have orthonormal columns")

    U, s, Vt = np.linalg.svd(z_bar.T @ w_breve, full_matrices=True)
    if s.size and s[0] > 1.0 + 1e-10:
        raise DomainError(f"alignment singular value {s[0]} exceeds 1 beyond tolerance")
    # deterministic sign convention for the shared singular pairs
    m = min(p, K)
    for j in range(m):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
            Vt[j, :] = -Vt[j, :]
    V = Vt.T
    for j in range(m, K):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    for j in range(m, p):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]

    sigma = np.zeros(K)
    sigma[:m] = np.clip(s[:m], 0.0, 1.0)
    root_n = np.sqrt(n)
    return AlignedBases(z=root_n * z_bar @ U, w=root_n * w_breve @ V, sigma=sigma, n=n, p=p, K=K)


def r_threshold(d_hat: float, p: int, K: int, n: int) -> float:
    """Selection threshold 1 - 4*sqrt(p*K*log(n)) / d_hat (natural log)."""
    if d_hat <= 0:
        raise EmptyNetworkError(f"average degree must be positive, got {d_hat}")
    return 1.0 - 4.0 * np.sqrt(p * K * np.log(n)) / d_hat


def select_r(sigma: np.ndarray, d_hat: float, p: int, K: int, n: int) -> int:
    """Largest index i with sigma_i >= threshold; 0 when the set is empty.

    The result is capped at min(p, K) (only that many principal angles
    exist); the cap can bind only when the threshold is nonpositive, which
    happens for very sparse networks and is reported with a warning.
    """
    sigma = np.asarray(sigma, dtype=float)
    thr = r_threshold(d_hat, p, K, n)
    qualifying = np.nonzero(sigma >= thr)[0]
    r_hat = int(qualifying.max() + 1) if qualifying.size else 0
    cap = min(p, K)
    if r_hat > cap:
        warnings.warn(
            f"selection threshold {thr:.4f} <= 0 admits all singular values; "
            f"capping r at min(p, K) = {cap}",
            RuntimeWarning,
            stacklevel=2,
        )
        r_hat = cap
    return r_hat


def projection_matrices(bases: AlignedBases) -> dict:
    """Orthogonal projections onto the shared, covariate-only, and network-only parts.

    Keys: ``R`` (span of the first r aligned directions), ``C`` (rest of
    col(X)), ``N`` (rest of the network subspace). R + C equals the
    projection onto col(X).
    """
    r = bases.require_r()
    n = bases.n
    z1 = bases.z[:, :r]
    z2 = bases.z[:, r:]
    w2 = bases.w[:, r:]
    return {
        "R": z1 @ z1.T / n,
        "C": z2 @ z2.T / n,
        "N": w2 @ w2.T / n,
    }


class TauDiagnostic(NamedTuple):
    value: float
    denominator: float
    sigma_term_dropped: bool


def tau_diagnostic(
    w_tilde: np.ndarray,
    w_oracle: np.ndarray,
    z_oracle: np.ndarray,
    sigma: np.ndarray,
    r: int,
    s: int,
) -> TauDiagnostic:
    """Scaled spectral-norm discrepancy between estimated and oracle network projections.

        tau = n^(-3/2) ||(W~ W~' - W W') Z|| / min{(1 - sigma_{r+1})^3, sigma_{r+s}^3}

    Oracle quantities are available in simulation mode only; the value is a
    diagnostic and never feeds back into fitting. With s = 0 the sigma_{r+s}
    term is undefined and is dropped (flagged in the result).
    """
    w_tilde = np.asarray(w_tilde, dtype=float)
    w_oracle = np.asarray(w_oracle, dtype=float)
    z_oracle = np.asarray(z_oracle, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n = w_tilde.shape[0]
    if w_oracle.shape != w_tilde.shape or z_oracle.shape[0] != n:
        raise DomainError("oracle and estimated bases have inconsistent shapes")
    if s < 0 or r < 0:
        raise DomainError("r and s must be nonnegative")
    for name, B in (("estimated W", w_tilde), ("oracle W", w_oracle), ("oracle Z", z_oracle)):
        if not np.allclose(np.sum(B**2, axis=0), n, rtol=1e-6):
            raise DomainError(f"{name} must be sqrt(n)-scaled (columns of squared norm n)")

    # (W~W~' - WW')Z without forming any n x n matrix
    diff = w_tilde @ (w_tilde.T @ z_oracle) - w_oracle @ (w_oracle.T @ z_oracle)
    spectral = scipy.linalg.svdvals(diff)[0] if diff.size else 0.0

    gap_term = (1.0 - sigma[r]) ** 3 if r < sigma.size else np.inf
    dropped = s == 0
    if dropped:
        denom = gap_term
    else:
        idx = r + s - 1
        if idx >= sigma.size:
            raise DomainError(f"r + s = {r + s} exceeds the number of singular values")
        denom = min(gap_term, sigma[idx] ** 3)
    if denom <= 0:
        raise DomainError("perturbation denominator is nonpositive")
    value = spectral / (n**1.5 * denom)
    return TauDiagnostic(value=float(value), denominator=float(denom), sigma_term_dropped=dropped)
