"""Double majority voting over a detectors x datasets indicator matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .detectors import IndicatorResult
from .model import ConfigurationError
from .pbdist import majority_floor, pb_tail


@dataclass(frozen=True)
class IndicatorMatrix:
    """Rows are detectors (V), columns are datasets (N)."""

    flags: np.ndarray
    confidences: np.ndarray
    detector_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.flags, dtype=bool))
        c = np.atleast_2d(np.asarray(self.confidences, dtype=float))
        if f.shape != c.shape or f.size == 0:
            raise ConfigurationError("flags and confidences must form one non-empty V x N grid")
        if np.any(c < 0) or np.any(c > 1):
            raise ConfigurationError("confidences must lie in [0, 1]")
        object.__setattr__(self, "flags", f)
        object.__setattr__(self, "confidences", c)
        if self.detector_weights is not None:
            w = np.asarray(self.detector_weights, dtype=float).reshape(-1)
            if w.size != f.shape[0]:
                raise ConfigurationError(f"expected {f.shape[0]} detector weights, got {w.size}")
            if np.any(w < 0) or np.any(w > 1):
                raise ConfigurationError("detector weights must lie in [0, 1]")
            object.__setattr__(self, "detector_weights", w)

    @classmethod
    def from_cells(cls, cells: Sequence[Sequence[IndicatorResult]], detector_weights=None):
        flags = [[c.flagged for c in row] for row in cells]
        confs = [[c.confidence for c in row] for row in cells]
        return cls(np.array(flags), np.array(confs), detector_weights)

    @property
    def shape(self):
        return self.flags.shape

    def cell(self, i: int, j: int) -> IndicatorResult:
        return IndicatorResult(bool(self.flags[i, j]), float(self.confidences[i, j]), f"detector{i}")


@dataclass(frozen=True)
class OutlierVerdict:
    is_outlier: bool
    per_dataset: tuple
    confidence: float
    votes: int


def _flags_of(column) -> np.ndarray:
    col = list(column)
    if col and isinstance(col[0], IndicatorResult):
        return np.array([c.flagged for c in col], dtype=bool)
    return np.asarray(col, dtype=bool)


def column_vote(column, delta: float, weights=None) -> bool:
    """delta-majority over the V detector outcomes for one dataset.

    With ``weights`` the outcome is the fuzzy vote sum(w_i * I_i) >= delta.
    """
    flags = _flags_of(column)
    if weights is None:
        return bool(flags.sum() >= delta)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != flags.size:
        raise ConfigurationError(f"expected {flags.size} weights, got {w.size}")
    return bool(np.dot(w, flags) >= delta)


def column_votes(matrix: IndicatorMatrix, delta: float) -> np.ndarray:
    """Vectorized :func:`column_vote` over every column."""
    if matrix.detector_weights is None:
        return matrix.flags.sum(axis=0) >= delta
    return matrix.detector_weights @ matrix.flags >= delta


def mean_aggregator(confidences: np.ndarray) -> np.ndarray:
    return confidences.mean(axis=0)


def verdict_confidence(
    matrix: IndicatorMatrix,
    delta_prime: int,
    aggregator: Callable[[np.ndarray], np.ndarray] = mean_aggregator,
) -> float:
    """Poisson-Binomial probability that at least a majority of datasets call x an outlier."""
    n = matrix.shape[1]
    col_probs = np.clip(aggregator(matrix.confidences), 0.0, 1.0)
    z = min(max(int(delta_prime), majority_floor(n)), n)
    return pb_tail(col_probs, z)


def double_majority(
    matrix: IndicatorMatrix,
    delta: float,
    delta_prime: int,
    aggregator: Callable[[np.ndarray], np.ndarray] = mean_aggregator,
) -> OutlierVerdict:
    per_dataset = column_votes(matrix, delta)
    votes = int(per_dataset.sum())
    return OutlierVerdict(
        is_outlier=votes >= delta_prime,
        per_dataset=tuple(bool(b) for b in per_dataset),
        confidence=verdict_confidence(matrix, delta_prime, aggregator),
        votes=votes,
    )
