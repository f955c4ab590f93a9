"""Exception hierarchy shared by all modules."""

import numpy as np


class HogsvdError(Exception):
    """Base class for errors raised by this package."""


class NonFiniteError(HogsvdError, ValueError):
    """Input contains NaN or Inf."""


class DimensionError(HogsvdError, ValueError):
    """Matrix shapes are incompatible with the requested operation."""


class DomainError(HogsvdError, ValueError):
    """A scalar argument lies outside its admissible range."""


class NotSPDError(HogsvdError, np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot."""


class ConvergenceError(HogsvdError, np.linalg.LinAlgError):
    """An iterative kernel did not converge within its sweep budget."""


class OrthogonalityError(HogsvdError, ValueError):
    """Blocks do not satisfy sum_i Q_i^T Q_i = I within tolerance."""


class RankDeficiencyError(HogsvdError, np.linalg.LinAlgError):
    """The stacked matrix does not have full column rank."""

    def __init__(self, sigma_min, sigma_max, rank_tol):
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.rank_tol = float(rank_tol)
        ratio = self.ratio
        super().__init__(
            f"stacked matrix is column-rank deficient: "
            f"sigma_min(R)/sigma_max(R) = {ratio:.3e} <= rank_tol = {rank_tol:.3e}"
        )

    @property
    def ratio(self):
        return self.sigma_min / self.sigma_max if self.sigma_max > 0 else 0.0


class ShapeMismatchError(HogsvdError, ValueError):
    """The matrix set fits none of the special shapes a check requires."""


class PreconditionError(HogsvdError, ValueError):
    """An operation was called on a result that violates its precondition."""


class InfeasibleError(HogsvdError, ValueError):
    """A planted instance cannot be built with the requested structure."""


class InputError(HogsvdError, ValueError):
    """A manifest or matrix file is missing, unreadable or malformed."""
