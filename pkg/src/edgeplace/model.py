"""Shared domain types: vectors, synopses, node state and pipeline configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .pbdist import majority_floor


class ConfigurationError(ValueError):
    """Raised for invalid configuration values or mismatched dimensionality."""


@dataclass(frozen=True)
class DataVector:
    values: np.ndarray
    source_node: int = -1
    sequence_id: int = -1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size < 1:
            raise ConfigurationError("a data vector needs at least one dimension")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("data vector values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Synopsis:
    """Per-dimension mean / population std summary of one dataset at one epoch.

    ``centroids`` is optional; when present, distance computations use the
    closest centroid instead of the mean.
    """

    node_id: int
    epoch: int
    means: np.ndarray
    stds: np.ndarray
    count: int
    centroids: Optional[np.ndarray] = None

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).reshape(-1)
        stds = np.asarray(self.stds, dtype=float).reshape(-1)
        if means.shape != stds.shape:
            raise ConfigurationError("means and stds must have the same length")
        if np.any(stds < 0):
            raise ConfigurationError("stds must be non-negative")
        if self.count < 0 or self.epoch < 0:
            raise ConfigurationError("count and epoch must be non-negative")
        if self.count <= 1 and np.any(stds != 0):
            raise ConfigurationError("a synopsis of <= 1 vector must have zero stds")
        for arr in (means, stds):
            arr.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        if self.centroids is not None:
            c = np.atleast_2d(np.asarray(self.centroids, dtype=float))
            if c.shape[1] != means.size:
                raise ConfigurationError("centroid dimensionality differs from means")
            c.setflags(write=False)
            object.__setattr__(self, "centroids", c)

    @property
    def dims(self) -> int:
        return self.means.size

    @property
    def usable(self) -> bool:
        """Whether detectors can be parameterized from this synopsis."""
        return self.count >= 2 and bool(np.all(self.stds > 0))


class RunningMoments:
    """Welford accumulators, one per dimension."""

    def __init__(self, dims: int):
        self.count = 0
        self.mean = np.zeros(dims)
        self.m2 = np.zeros(dims)

    def push(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(np.maximum(self.m2, 0.0) / self.count)


@dataclass
class NodeState:
    node_id: int
    dims: int
    dataset: list = field(default_factory=list)
    running_moments: RunningMoments = None
    peer_synopses: dict = field(default_factory=dict)
    quanta_history: dict = field(default_factory=dict)
    last_epoch: int = -1

    def __post_init__(self):
        if self.dims < 1:
            raise ConfigurationError("dims must be >= 1")
        if self.running_moments is None:
            self.running_moments = RunningMoments(self.dims)

    @property
    def count(self) -> int:
        return self.running_moments.count

    def data_matrix(self) -> np.ndarray:
        if not self.dataset:
            return np.empty((0, self.dims))
        return np.vstack([v.values for v in self.dataset])


def update_moments(state: NodeState, x: DataVector) -> NodeState:
    """Store ``x`` in the node's dataset and fold it into the running moments."""
    if x.dims != state.dims:
        raise ConfigurationError(
            f"vector has {x.dims} dimensions, node {state.node_id} expects {state.dims}"
        )
    state.dataset.append(x)
    state.running_moments.push(x.values)
    return state


def make_synopsis(state: NodeState, epoch: int) -> Synopsis:
    """Summarize the node's dataset for broadcast at ``epoch``.

    An empty dataset yields ``count=0`` with zero moments, which is never
    ``usable`` for detection.
    """
    if epoch <= state.last_epoch:
        raise ConfigurationError(
            f"epoch {epoch} does not follow last epoch {state.last_epoch} of node {state.node_id}"
        )
    rm = state.running_moments
    state.last_epoch = epoch
    return Synopsis(
        node_id=state.node_id,
        epoch=epoch,
        means=rm.mean.copy(),
        stds=rm.std,
        count=rm.count,
    )


@dataclass
class PipelineConfig:
    """All knobs of one pipeline run.

    ``delta`` / ``delta_prime`` default to strict majorities of the detector
    and node counts. ``bandwidth=None`` selects Silverman's rule per window,
    floored at ``bandwidth_floor``.
    """

    nodes: int = 10
    dims: int = 2
    topk: int = 2
    window: int = 10
    detectors: tuple = ("likelihood", "zscore", "chi_square")
    delta: Optional[float] = None
    delta_prime: Optional[int] = None
    epsilon: float = 0.1
    bandwidth: Optional[float] = None
    bandwidth_floor: float = 0.01
    lp_order: float = 2.0
    epoch_length: int = 10
    seed: int = 0
    likelihood_threshold: float = 0.05
    chi2_alpha: float = 0.001
    zscore_sigmas: float = 3.0
    quanta_mode: str = "synopsis_history"
    rank_order: str = "ascending"
    arrival: str = "round_robin"

    @property
    def n_detectors(self) -> int:
        return len(self.detectors)

    @property
    def effective_delta(self) -> float:
        return self.delta if self.delta is not None else majority_floor(self.n_detectors)

    @property
    def effective_delta_prime(self) -> int:
        return self.delta_prime if self.delta_prime is not None else majority_floor(self.nodes)

    def validate(self) -> "PipelineConfig":
        def bad(name, why):
            raise ConfigurationError(f"{name}: {why}")

        if self.nodes < 1:
            bad("nodes", "must be >= 1")
        if self.dims < 1:
            bad("dims", "must be >= 1")
        if self.nodes > 1 and not 1 <= self.topk <= self.nodes - 1:
            bad("topk", f"must satisfy 1 <= k <= N-1 = {self.nodes - 1}")
        if self.nodes == 1 and self.topk < 1:
            bad("topk", "must be >= 1")
        if self.window < 1:
            bad("window", "must be >= 1")
        if self.n_detectors < 1:
            bad("detectors", "at least one detector is required")
        unknown = set(self.detectors) - {"likelihood", "zscore", "chi_square"}
        if unknown:
            bad("detectors", f"unknown detectors {sorted(unknown)}")
        if not 1 <= self.effective_delta <= self.n_detectors:
            bad("delta", f"must lie in [1, {self.n_detectors}]")
        if not 1 <= self.effective_delta_prime <= self.nodes:
            bad("delta_prime", f"must lie in [1, {self.nodes}]")
        if self.bandwidth is not None and not self.bandwidth > 0:
            bad("bandwidth", "must be > 0")
        if not self.bandwidth_floor > 0:
            bad("bandwidth_floor", "must be > 0")
        if not self.epsilon >= 0:
            bad("epsilon", "must be >= 0")
        if not self.lp_order >= 1:
            bad("lp_order", "must be >= 1")
        if self.epoch_length < 1:
            bad("epoch_length", "must be >= 1")
        if not self.likelihood_threshold > 0:
            bad("likelihood_threshold", "must be > 0")
        if not 0 < self.chi2_alpha < 1:
            bad("chi2_alpha", "must lie in (0, 1)")
        if not self.zscore_sigmas > 0:
            bad("zscore_sigmas", "must be > 0")
        if self.quanta_mode not in ("synopsis_history", "stream_history"):
            bad("quanta_mode", "must be 'synopsis_history' or 'stream_history'")
        if self.rank_order not in ("ascending", "descending"):
            bad("rank_order", "must be 'ascending' or 'descending'")
        if self.arrival not in ("round_robin", "random"):
            bad("arrival", "must be 'round_robin' or 'random'")
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config fields: {sorted(extra)}")
        kw = dict(data)
        if "detectors" in kw:
            kw["detectors"] = tuple(kw["detectors"])
        return cls(**kw).validate()
