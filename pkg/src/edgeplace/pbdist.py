"""Poisson-Binomial distribution: exact pmf/tail and Normal/Poisson approximations.

The exact path expands the probability generating function
prod_i (1 - p_i + p_i t) one factor at a time, which is O(n^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import pdtrc


@dataclass(frozen=True)
class BernoulliProfile:
    """Success probabilities of independent, non-identical Bernoulli trials."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if p.size == 0:
            raise ValueError("a Bernoulli profile needs at least one trial")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("success probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size


ProfileLike = Union[BernoulliProfile, Sequence[float], np.ndarray]


def _probs(profile: ProfileLike) -> np.ndarray:
    if isinstance(profile, BernoulliProfile):
        return profile.probs
    return BernoulliProfile(profile).probs


def _check_z(z: int, n: int) -> None:
    if not 0 <= z <= n:
        raise ValueError(f"z={z} outside [0, {n}]")


def pmf_vector(profile: ProfileLike) -> np.ndarray:
    """Full pmf ``[P(Z=0), ..., P(Z=n)]``."""
    p = _probs(profile)
    pmf = np.zeros(p.size + 1)
    pmf[0] = 1.0
    for i, pi in enumerate(p, start=1):
        # in-place shift: pmf[1:i+1] gets the success branch
        pmf[1 : i + 1] = pmf[1 : i + 1] * (1.0 - pi) + pmf[0:i] * pi
        pmf[0] *= 1.0 - pi
    return pmf


def tail_vector(profile: ProfileLike) -> np.ndarray:
    """``F(z) = P(Z >= z)`` for every z in ``0..n``; non-increasing by construction."""
    pmf = pmf_vector(profile)
    tail = np.cumsum(pmf[::-1])[::-1]
    tail[0] = 1.0
    return np.clip(tail, 0.0, 1.0)


def pb_pmf(profile: ProfileLike, z: int) -> float:
    p = _probs(profile)
    _check_z(z, p.size)
    return float(pmf_vector(p)[z])


def pb_tail(profile: ProfileLike, z: int) -> float:
    """Probability of at least ``z`` successes."""
    p = _probs(profile)
    _check_z(z, p.size)
    return float(tail_vector(p)[z])


def pb_tail_approx(profile: ProfileLike, z: int, method: str = "normal") -> float:
    """Approximate ``P(Z >= z)``.

    ``normal`` matches mean sum(p) and variance sum(p(1-p)) with a 0.5
    continuity correction; ``poisson`` uses rate sum(p).
    """
    p = _probs(profile)
    _check_z(z, p.size)
    if z == 0:
        return 1.0
    mu = float(p.sum())
    if method == "normal":
        var = float((p * (1.0 - p)).sum())
        edge = z - 0.5
        if var == 0.0:
            return 1.0 if mu >= edge else 0.0
        return 0.5 * math.erfc((edge - mu) / math.sqrt(2.0 * var))
    if method == "poisson":
        # P(Z >= z) = P(Z > z - 1)
        return float(pdtrc(z - 1, mu))
    raise ValueError(f"unknown approximation {method!r}")


def majority_floor(n: int) -> int:
    """Smallest strict majority of ``n`` voters: n/2 + 1 (even), (n + 1)/2 (odd)."""
    if n < 1:
        raise ValueError("majority needs n >= 1")
    return n // 2 + 1
