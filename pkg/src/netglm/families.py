"""Exponential-family machinery for the three built-in response models.

Each family bundles the inverse link ``h`` (linear predictor -> mean), its
derivative ``h'``, the response variance ``v`` as a function of the linear
predictor, and the log-likelihood

    sum_i [ y_i * psi_i - b(psi_i) ] / a(phi) + d(y_i, phi),

with psi the natural parameter. All built-ins use the natural link, so
psi_i equals the linear predictor and v(h(t)) = h'(t) when the dispersion
is 1 (Gaussian variance is the dispersion itself).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, gammaln

from .errors import DomainError

# Bernoulli means are clamped away from {0, 1} so IRLS weights stay positive
# even under extreme linear predictors.
MEAN_CLAMP_EPS = 1e-8

BERNOULLI_LOGIT = "bernoulli-logit"
POISSON_LOG = "poisson-log"
GAUSSIAN_IDENTITY = "gaussian-identity"

_CLI_NAMES = {
    "logit": BERNOULLI_LOGIT,
    "bernoulli": BERNOULLI_LOGIT,
    "poisson": POISSON_LOG,
    "gaussian": GAUSSIAN_IDENTITY,
}


def _check_finite(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("linear predictor contains non-finite values")
    return t


@dataclass(frozen=True)
class GlmFamily:
    """One of the built-in response families.

    ``dispersion`` is the known scale phi (fixed, never estimated); it only
    matters for the Gaussian family, where it equals the response variance.
    ``natural_link`` is True for all built-ins and lets the estimator decide
    whether concavity-based safeguards (step halving on the log-likelihood)
    apply.
    """

    kind: str
    dispersion: float = 1.0
    natural_link: bool = True

    def __post_init__(self):
        if self.kind not in (BERNOULLI_LOGIT, POISSON_LOG, GAUSSIAN_IDENTITY):
            raise DomainError(f"unknown family kind {self.kind!r}")
        if not self.dispersion > 0:
            raise DomainError("dispersion must be positive")

    # -- link machinery ------------------------------------------------

    def mean(self, t) -> np.ndarray:
        """Inverse link h(t)."""
        t = _check_finite(t)
        if self.kind == BERNOULLI_LOGIT:
            return np.clip(expit(t), MEAN_CLAMP_EPS, 1.0 - MEAN_CLAMP_EPS)
        if self.kind == POISSON_LOG:
            return np.exp(t)
        return t.copy()

    def dmean(self, t) -> np.ndarray:
        """Derivative h'(t) of the inverse link."""
        t = _check_finite(t)
        if self.kind == BERNOULLI_LOGIT:
            m = self.mean(t)
            return m * (1.0 - m)
        if self.kind == POISSON_LOG:
            return np.exp(t)
        return np.ones_like(t)

    def variance(self, t) -> np.ndarray:
        """Response variance v evaluated at the linear predictor, i.e. v(h(t))."""
        t = _check_finite(t)
        if self.kind == BERNOULLI_LOGIT:
            m = self.mean(t)
            return m * (1.0 - m)
        if self.kind == POISSON_LOG:
            return np.exp(t)
        return np.full_like(t, self.dispersion)

    # -- likelihood ------------------------------------------------------

    def validate_response(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise DomainError("response contains non-finite values")
        if self.kind == BERNOULLI_LOGIT:
            if not np.all((y == 0.0) | (y == 1.0)):
                raise DomainError("Bernoulli responses must be 0/1")
        elif self.kind == POISSON_LOG:
            if np.any(y < 0) or np.any(y != np.round(y)):
                raise DomainError("Poisson responses must be nonnegative integers")
        return y

    def log_likelihood(self, y, eta) -> float:
        """Log-likelihood of ``y`` at linear predictor ``eta``."""
        y = self.validate_response(y)
        eta = _check_finite(eta)
        if y.shape != eta.shape:
            raise DomainError("response and linear predictor have different lengths")
        if self.kind == BERNOULLI_LOGIT:
            # y*eta - log(1 + e^eta), computed stably
            return float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        if self.kind == POISSON_LOG:
            return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))
        phi = self.dispersion
        resid = y - eta
        return float(-0.5 * np.sum(resid**2) / phi - 0.5 * y.size * np.log(2.0 * np.pi * phi))

    # -- sampling ----------------------------------------------------------

    def sample(self, eta, rng: np.random.Generator, noiseless: bool = False) -> np.ndarray:
        """Draw independent responses with mean h(eta).

        ``noiseless`` returns the mean vector itself; useful only for the
        Gaussian identity family, where the mean is a valid response.
        """
        eta = _check_finite(eta)
        mu = self.mean(eta)
        if noiseless:
            return mu
        if self.kind == BERNOULLI_LOGIT:
            return (rng.random(eta.shape) < mu).astype(float)
        if self.kind == POISSON_LOG:
            return rng.poisson(mu).astype(float)
        return mu + np.sqrt(self.dispersion) * rng.standard_normal(eta.shape)


def make_family(name: str, dispersion: float = 1.0) -> GlmFamily:
    """Build a family from its CLI name (logit | poisson | gaussian)."""
    key = name.strip().lower()
    if key not in _CLI_NAMES:
        raise DomainError(f"unknown family {name!r}; expected logit, poisson, or gaussian")
    return GlmFamily(kind=_CLI_NAMES[key], dispersion=dispersion)


def eval_link(family: GlmFamily, t: float) -> dict:
    """Evaluate the link bundle at a single point: mean, dmean, var."""
    arr = np.asarray([t], dtype=float)
    return {
        "mean": float(family.mean(arr)[0]),
        "dmean": float(family.dmean(arr)[0]),
        "var": float(family.variance(arr)[0]),
    }


def log_likelihood(family: GlmFamily, y, eta) -> float:
    return family.log_likelihood(y, eta)
