"""Individual outlier indicators mapping (vector, synopsis) to a flag and a confidence.

Each indicator has a scalar entry point taking a :class:`Synopsis` and a
``*_batch`` variant evaluating one vector against stacked per-dataset
means/stds (rows = datasets). The simulator uses the batch form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import chdtr, chdtri

from .model import ConfigurationError, DataVector, Synopsis

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
ABSTAIN_CONFIDENCE = 0.5


@dataclass(frozen=True)
class IndicatorResult:
    flagged: bool
    confidence: float
    detector_id: str


@dataclass(frozen=True)
class MixtureModel:
    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != len(self.components) or w.size == 0:
            raise ConfigurationError("one positive weight per component is required")
        if np.any(w <= 0) or not math.isclose(w.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ConfigurationError("mixture weights must be positive and sum to 1")
        dims = {s.dims for s in self.components}
        if len(dims) != 1:
            raise ConfigurationError("mixture components must share dimensionality")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", tuple(self.components))


def _values(x) -> np.ndarray:
    if isinstance(x, DataVector):
        return x.values
    return np.asarray(x, dtype=float).reshape(-1)


def _check_dims(x: np.ndarray, means: np.ndarray) -> None:
    if x.size != means.shape[-1]:
        raise ConfigurationError(
            f"vector has {x.size} dimensions, synopsis has {means.shape[-1]}"
        )


def usable_mask(stds: np.ndarray, counts: np.ndarray) -> np.ndarray:
    return (np.asarray(counts) >= 2) & np.all(stds > 0, axis=-1)


def _standardized(x, means, stds, usable):
    safe = np.where(usable[:, None], stds, 1.0)
    return (x - means) / safe


# --- likelihood -----------------------------------------------------------


def _density_confidence(density: np.ndarray, threshold: float) -> np.ndarray:
    # strictly decreasing in density; equals 0.5 exactly at the threshold
    ratio = density / threshold
    below = 1.0 - 0.5 * ratio
    with np.errstate(divide="ignore"):
        above = 0.5 / np.maximum(ratio, 1.0)
    return np.where(ratio < 1.0, below, above)


def likelihood_batch(x, means, stds, counts, threshold):
    """Flags and confidences of the product-of-Gaussians likelihood test.

    The decision statistic is the geometric mean of the per-dimension
    densities, so one threshold works across dimensionalities.
    """
    x = _values(x)
    means = np.atleast_2d(means)
    stds = np.atleast_2d(stds)
    _check_dims(x, means)
    usable = usable_mask(stds, counts)
    z = _standardized(x, means, stds, usable)
    safe_std = np.where(usable[:, None], stds, 1.0)
    log_pdf = -0.5 * z * z - np.log(safe_std) - LOG_SQRT_2PI
    density = np.exp(log_pdf.mean(axis=1))
    flagged = usable & (density < threshold)
    conf = np.where(usable, _density_confidence(density, threshold), ABSTAIN_CONFIDENCE)
    return flagged, conf


def likelihood(x, s: Synopsis) -> float:
    """Product over dimensions of the Gaussian densities parameterized by ``s``."""
    x = _values(x)
    _check_dims(x, s.means)
    z = (x - s.means) / s.stds
    return float(np.prod(np.exp(-0.5 * z * z) / (s.stds * math.sqrt(2 * math.pi))))


def likelihood_indicator(x, s: Synopsis, threshold: float = 0.05) -> IndicatorResult:
    f, c = likelihood_batch(x, s.means, s.stds, [s.count], threshold)
    return IndicatorResult(bool(f[0]), float(c[0]), "likelihood")


def mixture_pdf(model: MixtureModel, x) -> float:
    """Weighted sum over components of their per-dimension Gaussian products.

    A zero-std dimension is a point mass: infinite density at exact
    equality, zero elsewhere.
    """
    x = _values(x)
    total = 0.0
    for w, s in zip(model.weights, model.components):
        _check_dims(x, s.means)
        degenerate = s.stds == 0
        if np.any(degenerate):
            if np.any(x[degenerate] != s.means[degenerate]):
                continue
            return math.inf
        total += w * likelihood(x, s)
    return total


# --- z-score ---------------------------------------------------------------


def zscore_batch(x, means, stds, counts, sigmas: float = 3.0):
    """Majority-of-dimensions |z| > ``sigmas`` rule."""
    x = _values(x)
    means = np.atleast_2d(means)
    stds = np.atleast_2d(stds)
    _check_dims(x, means)
    usable = usable_mask(stds, counts)
    m = x.size
    need = math.ceil(m / 2)
    z = _standardized(x, means, stds, usable)
    exceed = (np.abs(z) > sigmas).sum(axis=1)
    flagged = usable & (exceed >= need)
    if m == need:
        hi = np.ones_like(exceed, dtype=float)
    else:
        hi = 0.5 + 0.5 * (exceed - need) / (m - need)
    conf = np.where(exceed >= need, hi, 0.5 * exceed / need)
    conf = np.where(usable, np.clip(conf, 0.0, 1.0), ABSTAIN_CONFIDENCE)
    return flagged, conf


def zscore_indicator(x, s: Synopsis, sigmas: float = 3.0) -> IndicatorResult:
    f, c = zscore_batch(x, s.means, s.stds, [s.count], sigmas)
    return IndicatorResult(bool(f[0]), float(c[0]), "zscore")


# --- chi-square -------------------------------------------------------------


@lru_cache(maxsize=256)
def chi2_critical(dof: int, alpha: float) -> float:
    """Upper ``alpha`` quantile of the chi-square distribution with ``dof`` dof."""
    return float(chdtri(dof, alpha))


def chi_square_batch(x, means, stds, counts, alpha: float = 0.001):
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha={alpha} must lie in (0, 1)")
    x = _values(x)
    means = np.atleast_2d(means)
    stds = np.atleast_2d(stds)
    _check_dims(x, means)
    usable = usable_mask(stds, counts)
    z = _standardized(x, means, stds, usable)
    stat = (z * z).sum(axis=1)
    flagged = usable & (stat > chi2_critical(x.size, alpha))
    conf = np.where(usable, chdtr(x.size, stat), ABSTAIN_CONFIDENCE)
    return flagged, conf


def chi_square_indicator(x, s: Synopsis, alpha: float = 0.001) -> IndicatorResult:
    f, c = chi_square_batch(x, s.means, s.stds, [s.count], alpha)
    return IndicatorResult(bool(f[0]), float(c[0]), "chi_square")


# --- all detectors at once --------------------------------------------------


def evaluate_detectors(x, means, stds, counts, detectors: Sequence[str], config):
    """V x N flag and confidence matrices for one vector over N datasets."""
    flags, confs = [], []
    for name in detectors:
        if name == "likelihood":
            f, c = likelihood_batch(x, means, stds, counts, config.likelihood_threshold)
        elif name == "zscore":
            f, c = zscore_batch(x, means, stds, counts, config.zscore_sigmas)
        elif name == "chi_square":
            f, c = chi_square_batch(x, means, stds, counts, config.chi2_alpha)
        else:
            raise ConfigurationError(f"unknown detector {name!r}")
        flags.append(f)
        confs.append(c)
    return np.vstack(flags), np.vstack(confs)
