"""Deterministic event loop over N edge nodes.

Vectors arrive one at a time at a node, pass the ensemble outlier gate and,
when accepted, are stored locally and replicated to the top-k most similar
peers. Every ``epoch_length`` arrivals all non-empty nodes broadcast a
synopsis to every peer.
"""

from __future__ import annotations

import enum
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .detectors import evaluate_detectors
from .ensemble import IndicatorMatrix, OutlierVerdict, double_majority
from .ingest import LabeledVector
from .model import ConfigurationError, DataVector, NodeState, PipelineConfig, make_synopsis, update_moments
from .placement import (
    PlacementDecision,
    QuantaWindow,
    gamma,
    gamma_rows,
    lp_distance,
    select_targets,
    silverman_bandwidth,
)


class RoutingOutcome(enum.Enum):
    REJECTED_TO_CLOUD = "rejected_to_cloud"
    STORED_REPLICATED = "stored_replicated"
    STORED_LOCAL_ONLY = "stored_local_only"


class EventKind(enum.Enum):
    VECTOR_ARRIVAL = "vector_arrival"
    EPOCH_TICK = "epoch_tick"


@dataclass(frozen=True)
class SimEvent:
    kind: EventKind
    payload: object
    target: Optional[int] = None


@dataclass(frozen=True)
class IngestResult:
    outcome: RoutingOutcome
    verdict: OutlierVerdict
    decision: Optional[PlacementDecision] = None


@dataclass
class ExperimentReport:
    omega: float
    omega_defined: bool
    tau: float
    per_dataset_stats: list
    replication_messages: int
    synopsis_messages: int
    baseline_messages: int
    accepted: int
    rejected: int
    injected: int
    injected_rejected: int
    clean_rejected: int
    tau_at_insert: float = 0.0
    wall_time_per_vector: float = 0.0

    @property
    def mean_sigma(self) -> float:
        sig = [float(np.mean(s)) for _, s, n in self.per_dataset_stats if n > 0]
        return float(np.mean(sig)) if sig else 0.0

    @property
    def vectors_per_sec(self) -> float:
        return 1.0 / self.wall_time_per_vector if self.wall_time_per_vector > 0 else math.inf


class EdgeNetwork:
    """N nodes plus the synopsis board they all see (broadcast is lossless)."""

    def __init__(self, config: PipelineConfig):
        self.config = config.validate()
        n, m, w = config.nodes, config.dims, config.window
        self.nodes = [NodeState(i, m) for i in range(n)]
        self.epoch = -1
        self.synopsis_history = [deque(maxlen=w) for _ in range(n)]
        self._hist_means = np.zeros((n, w, m))
        self._hist_valid = np.zeros((n, w), dtype=bool)
        self._latest_means = np.zeros((n, m))
        self._latest_stds = np.zeros((n, m))
        self._latest_counts = np.zeros(n, dtype=int)
        self._has_synopsis = np.zeros(n, dtype=bool)
        self.replication_messages = 0
        self.synopsis_messages = 0
        self.stored = np.zeros(n, dtype=int)
        self.stored_deviating = np.zeros(n, dtype=int)

    # -- synopses ---------------------------------------------------------

    def epoch_tick(self, epoch: Optional[int] = None) -> int:
        """Broadcast a fresh synopsis from every non-empty node; returns the message count."""
        epoch = self.epoch + 1 if epoch is None else epoch
        if epoch <= self.epoch:
            raise ConfigurationError(f"epoch {epoch} is not after {self.epoch}")
        self.epoch = epoch
        n = self.config.nodes
        sent = 0
        for node in self.nodes:
            if node.count == 0:
                continue
            syn = make_synopsis(node, epoch)
            i = node.node_id
            self.synopsis_history[i].append(syn)
            for peer in self.nodes:
                if peer.node_id != i:
                    peer.peer_synopses[i] = syn
            sent += n - 1
            self._latest_means[i] = syn.means
            self._latest_stds[i] = syn.stds
            self._latest_counts[i] = syn.count
            self._has_synopsis[i] = True
            hist = self.synopsis_history[i]
            self._hist_valid[i] = False
            for t, s in enumerate(hist):
                self._hist_means[i, t] = s.means
                self._hist_valid[i, t] = True
        self.synopsis_messages += sent
        return sent

    # -- vectors ----------------------------------------------------------

    def _store(self, node_id: int, x: DataVector) -> None:
        node = self.nodes[node_id]
        rm = node.running_moments
        if rm.count >= 2:
            sd = rm.std
            if np.any((np.abs(x.values - rm.mean) > 3.0 * sd) & (sd > 0)):
                self.stored_deviating[node_id] += 1
        self.stored[node_id] += 1
        update_moments(node, x)

    def seed_dataset(self, node_id: int, vectors: Sequence[DataVector]) -> None:
        """Preload historical data without running the pipeline or counting messages."""
        for v in vectors:
            update_moments(self.nodes[node_id], v)

    def indicator_matrix(self, node_id: int, x: np.ndarray) -> IndicatorMatrix:
        """Detectors x datasets; the arriving node uses its live moments for its own column."""
        node = self.nodes[node_id]
        means = self._latest_means.copy()
        stds = self._latest_stds.copy()
        counts = self._latest_counts.copy()
        means[node_id] = node.running_moments.mean
        stds[node_id] = node.running_moments.std
        counts[node_id] = node.count
        flags, confs = evaluate_detectors(x, means, stds, counts, self.config.detectors, self.config)
        return IndicatorMatrix(flags, confs)

    def peer_gammas(self, node_id: int, x: np.ndarray) -> dict:
        cfg = self.config
        node = self.nodes[node_id]
        if cfg.quanta_mode == "stream_history":
            out = {}
            for j in range(cfg.nodes):
                if j == node_id or not self._has_synopsis[j]:
                    continue
                win = node.quanta_history.get(j)
                if win is None:
                    win = node.quanta_history[j] = QuantaWindow(j, cfg.window)
                win.append(float(lp_distance(x, self._latest_means[j], cfg.lp_order)))
                h = cfg.bandwidth if cfg.bandwidth is not None else silverman_bandwidth(win.quanta, cfg.bandwidth_floor)
                out[j] = gamma(win, cfg.epsilon, h)
            return out
        # synopsis_history: quanta of x against each peer's latest W synopses
        peers = np.flatnonzero(self._has_synopsis)
        peers = peers[peers != node_id]
        if peers.size == 0:
            return {}
        dist = lp_distance(x, self._hist_means[peers], cfg.lp_order)
        g = gamma_rows(dist, self._hist_valid[peers], cfg.epsilon, cfg.bandwidth, cfg.bandwidth_floor)
        return {int(j): float(v) for j, v in zip(peers, g)}

    def ingest(self, node_id: int, x: DataVector) -> IngestResult:
        cfg = self.config
        if x.dims != cfg.dims:
            raise ConfigurationError(f"vector has {x.dims} dimensions, config expects {cfg.dims}")
        xv = x.values
        verdict = double_majority(self.indicator_matrix(node_id, xv), cfg.effective_delta, cfg.effective_delta_prime)
        if verdict.is_outlier:
            return IngestResult(RoutingOutcome.REJECTED_TO_CLOUD, verdict)
        self._store(node_id, x)
        gammas = self.peer_gammas(node_id, xv)
        if not gammas:
            return IngestResult(RoutingOutcome.STORED_LOCAL_ONLY, verdict, PlacementDecision((), {}, 0))
        decision = select_targets(gammas, cfg.topk, cfg.rank_order)
        for t in decision.targets:
            self._store(t, x)
        self.replication_messages += len(decision.targets)
        return IngestResult(RoutingOutcome.STORED_REPLICATED, verdict, decision)


def dataset_stats(node: NodeState, sigmas: float = 3.0):
    """(mean, std, size, local-outlier fraction) of one dataset, population moments."""
    data = node.data_matrix()
    if data.shape[0] == 0:
        z = np.zeros(node.dims)
        return z, z, 0, 0.0
    mu = data.mean(axis=0)
    sd = data.std(axis=0)
    dev = np.abs(data - mu)
    violates = ((dev > sigmas * sd) & (sd > 0)).any(axis=1)
    return mu, sd, data.shape[0], float(violates.mean())


def _insert_tau(net: EdgeNetwork) -> float:
    fr = net.stored_deviating[net.stored > 0] / net.stored[net.stored > 0]
    return float(fr.mean()) if fr.size else 0.0


def arrival_schedule(count: int, config: PipelineConfig) -> np.ndarray:
    if config.arrival == "round_robin":
        return np.arange(count) % config.nodes
    rng = np.random.default_rng(config.seed)
    return rng.integers(0, config.nodes, size=count)


def build_events(count: int, config: PipelineConfig, tick_at_start: bool = True) -> list:
    """Total order of arrivals and epoch ticks for a stream of ``count`` vectors."""
    nodes = arrival_schedule(count, config)
    events = []
    epoch = 0
    if tick_at_start:
        events.append(SimEvent(EventKind.EPOCH_TICK, epoch))
        epoch += 1
    for i in range(count):
        events.append(SimEvent(EventKind.VECTOR_ARRIVAL, i, int(nodes[i])))
        if (i + 1) % config.epoch_length == 0:
            events.append(SimEvent(EventKind.EPOCH_TICK, epoch))
            epoch += 1
    return events


def run_experiment(config: PipelineConfig, trace: Sequence, warmup: Optional[Sequence[Sequence[DataVector]]] = None):
    """Run one stream through a fresh network and summarize it.

    ``trace`` holds :class:`LabeledVector` items (plain vectors count as
    clean). ``warmup[i]`` optionally preloads node ``i``'s dataset.
    Returns ``(report, network)``.
    """
    config.validate()
    if not trace:
        raise ConfigurationError("trace is empty")
    items = [t if isinstance(t, LabeledVector) else LabeledVector(t, False) for t in trace]
    for it in items:
        if it.vector.dims != config.dims:
            raise ConfigurationError(f"trace vector has {it.vector.dims} dimensions, config expects {config.dims}")

    net = EdgeNetwork(config)
    if warmup is not None:
        if len(warmup) != config.nodes:
            raise ConfigurationError("warmup needs one dataset per node")
        for i, vecs in enumerate(warmup):
            net.seed_dataset(i, vecs)

    accepted = rejected = injected_rejected = clean_rejected = 0
    events = build_events(len(items), config)
    t0 = time.perf_counter()
    for ev in events:
        if ev.kind is EventKind.EPOCH_TICK:
            net.epoch_tick(ev.payload)
            continue
        item = items[ev.payload]
        res = net.ingest(ev.target, item.vector)
        if res.outcome is RoutingOutcome.REJECTED_TO_CLOUD:
            rejected += 1
            if item.is_injected_outlier:
                injected_rejected += 1
            else:
                clean_rejected += 1
        else:
            accepted += 1
    elapsed = time.perf_counter() - t0

    stats, taus = [], []
    for node in net.nodes:
        mu, sd, size, tau = dataset_stats(node)
        stats.append((mu, sd, size))
        if size > 0:
            taus.append(tau)
    injected = sum(it.is_injected_outlier for it in items)
    report = ExperimentReport(
        omega=injected_rejected / injected if injected else 1.0,
        omega_defined=injected > 0,
        tau=float(np.mean(taus)) if taus else 0.0,
        per_dataset_stats=stats,
        replication_messages=net.replication_messages,
        synopsis_messages=net.synopsis_messages,
        baseline_messages=accepted * (config.nodes - 1),
        accepted=accepted,
        rejected=rejected,
        injected=injected,
        injected_rejected=injected_rejected,
        clean_rejected=clean_rejected,
        tau_at_insert=_insert_tau(net),
        wall_time_per_vector=elapsed / len(items),
    )
    return report, net
