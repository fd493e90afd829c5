"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class DomainError(ValueError):
    """A parameter vector lies outside the domain of a generator or family."""


class DegeneracyError(RuntimeError):
    """A generator could not be built because its Hessian is not positive
    definite (rank-deficient sample, coincident components, or constant
    sufficient statistics)."""


class NoSolutionError(RuntimeError):
    """Numerical gradient inversion failed to reach the requested residual.

    Carries the target gradient value, the last iterate and the last
    residual so callers (e.g. left-sided clustering) can diagnose which
    request was unreachable.
    """

    def __init__(self, message: str, *, target=None, last_point=None,
                 residual: float | None = None):
        super().__init__(message)
        self.target = None if target is None else np.asarray(target, float)
        self.last_point = None if last_point is None else np.asarray(last_point, float)
        self.residual = residual
