from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeplace.ingest import LabeledVector, inject_outliers, synth_stream
from edgeplace.model import ConfigurationError, DataVector, PipelineConfig
from edgeplace.simulator import (
    EdgeNetwork,
    EventKind,
    RoutingOutcome,
    build_events,
    dataset_stats,
    run_experiment,
)


def _uniform(n, m=2, seed=0):
    return synth_stream(n, m, [("uniform", 0, 1)] * m, seed)


def _warm_net(cfg, per_node=30, seed=1):
    net = EdgeNetwork(cfg)
    vecs = _uniform(per_node * cfg.nodes, cfg.dims, seed)
    for i in range(cfg.nodes):
        for v in vecs[i * per_node : (i + 1) * per_node]:
            net._store(i, v)
    net.epoch_tick()
    return net


def test_far_outlier_rejected():
    net = _warm_net(PipelineConfig(nodes=5, dims=2, topk=2))
    res = net.ingest(0, DataVector([10.0, 10.0]))
    assert res.outcome is RoutingOutcome.REJECTED_TO_CLOUD
    assert res.verdict.votes == 5
    assert net.replication_messages == 0


def test_mean_vector_replicated():
    net = _warm_net(PipelineConfig(nodes=5, dims=2, topk=2))
    before = [n.count for n in net.nodes]
    res = net.ingest(0, DataVector([0.5, 0.5]))
    assert res.outcome is RoutingOutcome.STORED_REPLICATED
    assert len(res.decision.targets) == 2 and 0 not in res.decision.targets
    after = [n.count for n in net.nodes]
    assert sum(after) - sum(before) == 3
    assert net.replication_messages == 2


def test_cold_start_stores_locally():
    net = EdgeNetwork(PipelineConfig(nodes=4, topk=2))
    assert net.epoch_tick() == 0
    res = net.ingest(2, DataVector([0.3, 0.3]))
    assert res.outcome is RoutingOutcome.STORED_LOCAL_ONLY
    assert net.replication_messages == 0 and net.nodes[2].count == 1


def test_epoch_tick_messages():
    cfg = PipelineConfig(nodes=10)
    net = _warm_net(cfg, per_node=3)
    assert net.synopsis_messages == 90
    partial = EdgeNetwork(cfg)
    partial._store(0, DataVector([0.1, 0.1]))
    partial._store(3, DataVector([0.1, 0.1]))
    assert partial.epoch_tick() == 18


def test_epoch_replacement_and_monotone():
    net = _warm_net(PipelineConfig(nodes=3, topk=1), per_node=5)
    net._store(1, DataVector([0.9, 0.9]))
    net.epoch_tick(5)
    assert net.nodes[0].peer_synopses[1].epoch == 5
    assert net.nodes[0].peer_synopses[1].count == 6
    with pytest.raises(ConfigurationError):
        net.epoch_tick(5)


def test_dimension_mismatch():
    net = EdgeNetwork(PipelineConfig(nodes=3, dims=2, topk=1))
    with pytest.raises(ConfigurationError):
        net.ingest(0, DataVector([0.1, 0.2, 0.3]))
    with pytest.raises(ConfigurationError):
        run_experiment(PipelineConfig(nodes=3, dims=3, topk=1), _uniform(5))


def test_event_schedule():
    cfg = PipelineConfig(nodes=3, epoch_length=4)
    ev = build_events(10, cfg)
    ticks = [e.payload for e in ev if e.kind is EventKind.EPOCH_TICK]
    assert ticks == [0, 1, 2]
    assert [e.target for e in ev if e.kind is EventKind.VECTOR_ARRIVAL] == [i % 3 for i in range(10)]
    rnd = build_events(50, PipelineConfig(nodes=3, arrival="random", seed=2))
    assert rnd == build_events(50, PipelineConfig(nodes=3, arrival="random", seed=2))


def test_clean_trace_omega_vacuous():
    report, _ = run_experiment(PipelineConfig(nodes=5, topk=2), _uniform(100))
    assert report.omega == 1.0 and not report.omega_defined
    assert 0 <= report.tau <= 1
    assert report.injected == 0


def _labeled(n=600, m=2, rate=0.01, mag=5.0, seed=0):
    return inject_outliers(_uniform(n, m, seed), rate, mag, seed)


def _warmup(cfg, per=40, seed=3):
    vecs = _uniform(per * cfg.nodes, cfg.dims, seed)
    return [vecs[i * per : (i + 1) * per] for i in range(cfg.nodes)]


def test_message_invariants():
    cfg = PipelineConfig(nodes=8, topk=3)
    report, net = run_experiment(cfg, _labeled(), _warmup(cfg))
    assert report.replication_messages <= cfg.topk * report.accepted
    assert report.baseline_messages == report.accepted * (cfg.nodes - 1)
    assert report.accepted + report.rejected == 600
    # each stored arrival sits on its origin plus each replica
    stored = sum(net.stored)
    assert stored == report.accepted + report.replication_messages
    assert sum(size for _, _, size in report.per_dataset_stats) == 40 * cfg.nodes + stored


def test_residency_one_plus_targets():
    cfg = PipelineConfig(nodes=6, topk=2)
    net = EdgeNetwork(cfg)
    for i, chunk in enumerate(_warmup(cfg)):
        net.seed_dataset(i, chunk)
    net.epoch_tick()
    for j, v in enumerate(_uniform(60, seed=8)):
        res = net.ingest(j % cfg.nodes, v)
        if res.outcome is RoutingOutcome.REJECTED_TO_CLOUD:
            continue
        homes = sum(any(d is v for d in node.dataset) for node in net.nodes)
        assert homes == 1 + len(res.decision.targets)


def test_determinism():
    cfg = PipelineConfig(nodes=6, topk=2, seed=4)
    data, warm = _labeled(seed=4), _warmup(cfg)
    a, _ = run_experiment(cfg, data, warm)
    b, _ = run_experiment(cfg, data, warm)
    for field in ("omega", "tau", "replication_messages", "synopsis_messages", "accepted", "tau_at_insert"):
        assert getattr(a, field) == getattr(b, field)
    for (m1, s1, n1), (m2, s2, n2) in zip(a.per_dataset_stats, b.per_dataset_stats):
        assert n1 == n2 and m1.tobytes() == m2.tobytes() and s1.tobytes() == s2.tobytes()


def test_k5_replicates_more_than_k2():
    data = _labeled(1000, seed=2)
    r2, _ = run_experiment(PipelineConfig(nodes=10, topk=2), data, _warmup(PipelineConfig(nodes=10)))
    r5, _ = run_experiment(PipelineConfig(nodes=10, topk=5), data, _warmup(PipelineConfig(nodes=10)))
    assert r2.replication_messages == 2 * r2.accepted
    assert r5.replication_messages == 5 * r5.accepted
    assert r5.replication_messages / r2.replication_messages == pytest.approx(2.5, rel=0.02)


def test_replicate_everywhere_tau_not_below_small_k():
    data = _labeled(800, seed=5)
    cfg = PipelineConfig(nodes=6)
    small, _ = run_experiment(PipelineConfig(nodes=6, topk=1), data, _warmup(cfg, seed=6))
    full, _ = run_experiment(PipelineConfig(nodes=6, topk=5), data, _warmup(cfg, seed=6))
    assert full.tau >= small.tau


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 1000))
def test_omega_monotone_in_magnitude(seed):
    cfg = PipelineConfig(nodes=5, topk=2)
    base = _uniform(300, seed=seed)
    warm = _warmup(cfg, seed=seed + 1)
    omegas = [run_experiment(cfg, inject_outliers(base, 0.03, mag, seed), warm)[0].omega for mag in (3.5, 5.0, 8.0)]
    assert omegas == sorted(omegas)


def test_dataset_stats_tau():
    cfg = PipelineConfig(nodes=1, topk=1)
    net = EdgeNetwork(cfg)
    for v in [0.0] * 20 + [1.0]:
        net._store(0, DataVector([v, v]))
    mu, sd, size, tau = dataset_stats(net.nodes[0])
    assert size == 21 and tau == pytest.approx(1 / 21)
    np.testing.assert_allclose(mu, [1 / 21, 1 / 21])


def test_plain_vectors_count_as_clean():
    cfg = PipelineConfig(nodes=3, topk=1)
    vecs = _uniform(30)
    a, _ = run_experiment(cfg, vecs)
    b, _ = run_experiment(cfg, [LabeledVector(v, False) for v in vecs])
    assert a.replication_messages == b.replication_messages


def test_stream_history_mode_runs():
    cfg = PipelineConfig(nodes=5, topk=2, quanta_mode="stream_history", window=4)
    report, net = run_experiment(cfg, _labeled(200), _warmup(cfg))
    assert report.replication_messages == 2 * report.accepted
    assert all(len(w) <= 4 for w in net.nodes[0].quanta_history.values())


def test_arrival_counts_round_robin():
    cfg = PipelineConfig(nodes=4, epoch_length=5)
    ev = build_events(40, cfg, tick_at_start=False)
    assert Counter(e.target for e in ev if e.kind is EventKind.VECTOR_ARRIVAL) == {0: 10, 1: 10, 2: 10, 3: 10}
    assert sum(e.kind is EventKind.EPOCH_TICK for e in ev) == 8
