"""MARK step: minimal-cardinality Doerfler marking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MarkingResult", "ConvergedError", "dorfler_mark"]


class ConvergedError(ValueError):
    """The estimator vanishes; there is nothing to mark."""


@dataclass(frozen=True)
class MarkingResult:
    marked: np.ndarray      # sorted element positions
    fraction: float         # eta(M) / eta(T)
    order: np.ndarray       # marked elements in selection order

    @property
    def cardinality(self) -> int:
        return len(self.marked)


def dorfler_mark(eta2, theta: float) -> MarkingResult:
    """Smallest set ``M`` with ``eta(M) >= theta * eta(T)``.

    Elements are taken by decreasing ``eta_T^2`` (ties: smaller position
    first) until the running sum reaches ``theta^2`` times the total.  A
    greedy prefix of the sorted indicators has the fewest elements among all
    sets that reach the threshold.

    Parameters
    ----------
    eta2 : array_like or Indicators
        Squared element indicators.
    theta : float
        Marking parameter in (0, 1).
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    eta2 = np.asarray(getattr(eta2, "eta2", eta2), dtype=float)
    if np.any(eta2 < 0) or not np.all(np.isfinite(eta2)):
        raise ValueError("indicators must be finite and non-negative")
    order = np.lexsort((np.arange(len(eta2)), -eta2))
    csum = np.cumsum(eta2[order])
    total = csum[-1] if len(csum) else 0.0
    if total <= 0.0:
        raise ConvergedError("estimator is zero; converged, nothing to mark")
    count = int(np.searchsorted(csum, theta * theta * total, side="left")) + 1
    count = min(count, len(eta2))
    chosen = order[:count]
    return MarkingResult(np.sort(chosen), float(np.sqrt(csum[count - 1] / total)), chosen)
