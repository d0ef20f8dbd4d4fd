"""Define basic API."""

from __future__ import annotations

import abc
from typing import TYPE_CHECKING, Any

from joblib import Parallel, delayed

if TYPE_CHECKING:
    from collections.abc import Generator, Sequence

    from .cocycle import QpCocycle


class PrecisionExhaustedError(RuntimeError):
    """Raised when a computation needs more software precision than it was given."""

    def __init__(self, message: str, *, achieved: int | None = None, precision_bits: int | None = None) -> None:
        """
        Args:
            message: Human readable description.
            achieved: Depth, stage or k reached before precision ran out.
            precision_bits: Working precision in use.
        """
        super().__init__(message)
        self.achieved = achieved
        self.precision_bits = precision_bits


class ConvergenceError(RuntimeError):
    """Raised when an iterative scheme fails to meet its tolerance."""

    def __init__(self, message: str, *, residual: float | None = None) -> None:
        """
        Args:
            message: Human readable description.
            residual: Achieved residual at the point of failure.
        """
        super().__init__(message)
        self.residual = residual


class SpectralCalc(abc.ABC):
    """API for a spectral property calculator."""

    @abc.abstractmethod
    def calc(self, cocycle: QpCocycle) -> dict:
        """All SpectralCalc subclasses should implement a calc method that takes in a quasi-periodic cocycle
        and returns a dict. The method can return more than one property.

        Args:
            cocycle: Quasi-periodic cocycle.

        Returns:
            dict[str, Any]: In the form {"prop_name": value}.
        """

    def calc_many(
        self, cocycles: Sequence[QpCocycle], n_jobs: None | int = None, **kwargs: Any
    ) -> Generator[dict, None, None]:
        """Performs calc on many cocycles. The return type is a generator given that the calc method can
        potentially be expensive. It is trivial to convert the generator to a list/tuple. Results are yielded in
        input order regardless of completion order.

        Args:
            cocycles: List or generator of cocycles.
            n_jobs: The maximum number of concurrently running jobs. If -1 all CPUs are used. For n_jobs below -1,
                (n_cpus + 1 + n_jobs) are used. None is a marker for `unset` that will be interpreted as n_jobs=1
                unless the call is performed under a parallel_config() context manager that sets another value for
                n_jobs.
            **kwargs: Passthrough to joblib.Parallel.

        Returns:
            Generator of dicts.
        """
        parallel = Parallel(n_jobs=n_jobs, return_as="generator", **kwargs)
        return parallel(delayed(self.calc)(c) for c in cocycles)
