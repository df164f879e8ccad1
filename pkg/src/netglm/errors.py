"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError -> 3,
DataError -> 4. Library users can catch NetglmError to intercept anything
raised deliberately by this package.
"""

from __future__ import annotations


class NetglmError(Exception):
    """Base class for all errors raised by netglm."""


class ConfigError(NetglmError):
    """Invalid or inconsistent configuration (bad flags, impossible targets)."""


class DataError(NetglmError):
    """Malformed or out-of-domain input data."""


class NumericalError(NetglmError):
    """A numerical procedure failed or encountered a degenerate problem."""


class DomainError(DataError):
    """A value lies outside the mathematical domain of an operation."""


class DegenerateDesignError(NumericalError):
    """Covariate matrix is (numerically) rank deficient."""


class EmptyNetworkError(NumericalError):
    """Relational matrix has non-positive total weight."""


class InfeasibleDensityError(ConfigError):
    """Requested average degree cannot be achieved with probabilities in [0, 1]."""


class CollinearityError(NumericalError):
    """A required inner matrix is singular."""


class DegenerateFunctionalError(NumericalError):
    """The linear functional to be tested has (numerically) zero projected design."""


class UndefinedAssortativityError(DataError):
    """Assortativity is undefined when all edge endpoints share one level."""


class IrlsDivergenceError(NumericalError):
    """IRLS failed to converge within the iteration budget.

    Carries the iterate history so callers can diagnose the failure:
    ``history`` is a list of ``(gamma, log_likelihood, score_inf_norm)``
    triples, one per iteration.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []
