"""Distance quanta, Gaussian-kernel density estimates over them, and top-k host selection."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.special import erfc

from .model import ConfigurationError, DataVector, Synopsis

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
SQRT2 = math.sqrt(2.0)


class EmptyWindowError(LookupError):
    """No quanta are available, so no density can be estimated."""


class QuantaWindow:
    """Ring buffer of the latest ``capacity`` distance quanta, newest last."""

    def __init__(self, node_id: int, capacity: int, quanta: Iterable[float] = ()):
        if capacity < 1:
            raise ConfigurationError("window capacity must be >= 1")
        self.node_id = node_id
        self.capacity = capacity
        self._buf = deque(maxlen=capacity)
        for g in quanta:
            self.append(g)

    def append(self, g: float) -> None:
        g = float(g)
        if not (math.isfinite(g) and g >= 0):
            raise ValueError(f"quantum must be finite and >= 0, got {g}")
        self._buf.append(g)

    @property
    def quanta(self) -> np.ndarray:
        return np.fromiter(self._buf, dtype=float, count=len(self._buf))

    def __len__(self):
        return len(self._buf)

    def __iter__(self):
        return iter(self._buf)

    def __repr__(self):
        return f"QuantaWindow(node_id={self.node_id}, capacity={self.capacity}, quanta={list(self._buf)})"


@dataclass(frozen=True)
class PlacementDecision:
    targets: tuple
    gammas: dict = field(default_factory=dict)
    eligible: int = 0


def lp_distance(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    """L_p distance along the last axis (broadcasting)."""
    d = np.abs(a - b)
    if math.isinf(p):
        return d.max(axis=-1)
    if p == 2:
        return np.sqrt((d * d).sum(axis=-1))
    if p == 1:
        return d.sum(axis=-1)
    return (d**p).sum(axis=-1) ** (1.0 / p)


def quantum(x, s: Synopsis, p: float = 2.0) -> float:
    """Distance between x and a synopsis: to its means, or to the closest centroid."""
    if not p >= 1:
        raise ConfigurationError("norm order must be >= 1")
    xv = x.values if isinstance(x, DataVector) else np.asarray(x, dtype=float).reshape(-1)
    if xv.size != s.dims:
        raise ConfigurationError(f"vector has {xv.size} dimensions, synopsis has {s.dims}")
    if s.centroids is not None:
        return float(lp_distance(xv, s.centroids, p).min())
    return float(lp_distance(xv, s.means, p))


def gaussian_kernel(u):
    return INV_SQRT_2PI * np.exp(-0.5 * np.square(u))


class IncrementalKDE:
    """Density at a fixed query point, updated one sample at a time.

    After ``t`` samples the value equals (1/(t h)) * sum K((g - g_i)/h).
    """

    def __init__(self, query: float, bandwidth: float):
        if not bandwidth > 0:
            raise ConfigurationError("bandwidth must be > 0")
        self.query = float(query)
        self.h = float(bandwidth)
        self.t = 0
        self.value = 0.0

    def update(self, sample: float) -> float:
        self.t += 1
        k = float(gaussian_kernel((self.query - sample) / self.h))
        self.value = (self.t - 1) / self.t * self.value + k / (self.t * self.h)
        return self.value


def _window_values(window) -> np.ndarray:
    vals = window.quanta if isinstance(window, QuantaWindow) else np.asarray(window, dtype=float)
    if vals.size == 0:
        raise EmptyWindowError("empty quanta window")
    return vals


def _check_h(h: float) -> None:
    if not h > 0:
        raise ConfigurationError("bandwidth must be > 0")


def kde_pdf(window, g: float, h: float) -> float:
    _check_h(h)
    est = IncrementalKDE(g, h)
    for sample in _window_values(window):
        est.update(sample)
    return est.value


def kde_cdf(window, g: float, h: float) -> float:
    """Kernel-smoothed CDF: mean of Gaussian CDFs centred on each quantum."""
    _check_h(h)
    vals = _window_values(window)
    # 1/2 (1 + erf(u)) == 1/2 erfc(-u), exact in the lower tail
    return float(np.clip(np.mean(0.5 * erfc((vals - g) / (h * SQRT2))), 0.0, 1.0))


def gamma(window, epsilon: float, h: float) -> float:
    """Estimated probability that the distance quantum exceeds ``epsilon``."""
    _check_h(h)
    vals = _window_values(window)
    # complement taken analytically so tiny gammas keep their resolution
    return float(np.clip(np.mean(0.5 * erfc((epsilon - vals) / (h * SQRT2))), 0.0, 1.0))


def silverman_bandwidth(values, floor: float = 0.01) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return floor
    return max(1.06 * float(v.std()) * v.size ** (-0.2), floor)


def gamma_rows(dist: np.ndarray, valid: np.ndarray, epsilon: float, bandwidth: Optional[float], floor: float):
    """Row-wise :func:`gamma` over a (peers x W) distance matrix with a validity mask.

    Rows without valid entries come back as NaN.
    """
    n = valid.sum(axis=1)
    if bandwidth is None:
        safe_n = np.maximum(n, 1)
        mean = np.where(valid, dist, 0.0).sum(axis=1) / safe_n
        var = np.where(valid, (dist - mean[:, None]) ** 2, 0.0).sum(axis=1) / safe_n
        h = np.where(n >= 2, 1.06 * np.sqrt(var) * safe_n ** (-0.2), floor)
        h = np.maximum(h, floor)
    else:
        h = np.full(dist.shape[0], float(bandwidth))
    tail = 0.5 * erfc((epsilon - dist) / (h[:, None] * SQRT2))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(valid, tail, 0.0).sum(axis=1) / n
    return np.clip(g, 0.0, 1.0)


def select_targets(gammas: Mapping[int, float], k: int, order: str = "ascending") -> PlacementDecision:
    """Rank peers by gamma and keep the first ``k``.

    ``ascending`` puts the most similar peers (lowest exceedance probability)
    first; ties go to the lower node id.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if order == "ascending":
        key = lambda item: (item[1], item[0])
    elif order == "descending":
        key = lambda item: (-item[1], item[0])
    else:
        raise ConfigurationError(f"unknown rank order {order!r}")
    ranked = sorted(gammas.items(), key=key)
    chosen = tuple(node for node, _ in ranked[:k])
    return PlacementDecision(targets=chosen, gammas=dict(gammas), eligible=len(gammas))
