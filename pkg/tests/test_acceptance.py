"""Acceptance criteria, each at its stated tolerance.

Every check records a PASS/FAIL line, collected in the terminal summary.
"""

import csv
import math
import time

import numpy as np
import pytest

from edgeplace.cli import main
from edgeplace.detectors import chi2_critical, chi_square_batch, chi_square_indicator, likelihood_indicator, zscore_indicator
from edgeplace.experiment import TIMING_COLUMNS, ExperimentManifest, build_scenario, load_matrix, run_cell
from edgeplace.model import PipelineConfig, Synopsis
from edgeplace.pbdist import majority_floor, pb_pmf, pb_tail
from edgeplace.placement import IncrementalKDE, kde_cdf, kde_pdf
from edgeplace.simulator import EdgeNetwork, EventKind, RoutingOutcome, build_events, run_experiment
from oracles import kde_pdf_batch, normal_two_sided_critical, pb_enumerate

pytestmark = pytest.mark.acceptance

NODES, TOPK, DIMS = (10, 50, 100), (2, 5), (2, 10)
TABLE_W = 10


# 1 -----------------------------------------------------------------------


def test_c1_poisson_binomial_oracle(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        probs = rng.uniform(size=int(rng.integers(1, 13))).tolist()
        ref = pb_enumerate(probs)
        for z in range(len(probs) + 1):
            worst = max(worst, abs(pb_pmf(probs, z) - ref[z]), abs(pb_tail(probs, z) - sum(ref[z:])))
    elapsed = time.perf_counter() - t0
    criterion("C1 pb_pmf/pb_tail vs enumeration", worst <= 1e-12 and elapsed < 5.0,
              f"max err {worst:.2e}, {elapsed:.2f} s")


# 2 -----------------------------------------------------------------------


def _majority_oracle(n):
    # smallest integer strictly greater than n/2
    return (n + 1) // 2 if n % 2 else n // 2 + 1


def test_c2_majority_floor(criterion):
    bad = [n for n in range(1, 1001) if majority_floor(n) != _majority_oracle(n)]
    criterion("C2 majority_floor N=1..1000", not bad, f"{len(bad)} mismatches")


# 3 -----------------------------------------------------------------------


def test_c3_kde_consistency(criterion):
    rng = np.random.default_rng(99)
    worst_inc = worst_fd = 0.0
    monotone = True
    step = 1e-5
    for _ in range(100):
        w = int(rng.integers(1, 51))
        window = rng.gamma(2.0, 0.1, size=w).tolist()
        h = float(rng.uniform(0.02, 0.5))
        g = float(rng.uniform(-0.2, 1.2))
        est = IncrementalKDE(g, h)
        for t, s in enumerate(window, 1):
            est.update(s)
            worst_inc = max(worst_inc, abs(est.value - kde_pdf_batch(window[:t], g, h)))
        grid = np.linspace(min(window) - 3 * h, max(window) + 3 * h, 100)
        cdf = np.array([kde_cdf(window, x, h) for x in grid])
        monotone &= bool(np.all(np.diff(cdf) >= 0))
        for x in grid:
            fd = (kde_cdf(window, x + step, h) - kde_cdf(window, x - step, h)) / (2 * step)
            worst_fd = max(worst_fd, abs(fd - kde_pdf(window, x, h)))
    criterion("C3a incremental KDE vs batch", worst_inc <= 1e-9, f"max err {worst_inc:.2e}")
    criterion("C3b d/dg kde_cdf vs kde_pdf", worst_fd <= 1e-4, f"max err {worst_fd:.2e}")
    criterion("C3c kde_cdf monotone", monotone)


# 4 -----------------------------------------------------------------------


def test_c4_chi_square_vs_normal(criterion):
    alpha = 0.001
    crit = normal_two_sided_critical(alpha)
    gap = abs(math.sqrt(chi2_critical(1, alpha)) - crit)
    zs = np.linspace(-6, 6, 50)
    agree = all(
        bool(chi_square_batch(np.array([z]), [[0.0]], [[1.0]], [10], alpha)[0][0]) == (abs(z) > crit) for z in zs
    )
    criterion("C4a chi-square M=1 vs two-sided normal", agree and gap <= 1e-9, f"critical gap {gap:.2e}")


def test_c4_translation_covariance(criterion):
    rng = np.random.default_rng(5)
    detectors = {
        "likelihood": lambda x, s: likelihood_indicator(x, s, 0.05),
        "zscore": lambda x, s: zscore_indicator(x, s, 3.0),
        "chi_square": lambda x, s: chi_square_indicator(x, s, 0.001),
    }
    failures = 0
    for _ in range(100):
        m = int(rng.integers(1, 11))
        mu = rng.uniform(-1, 1, m)
        sd = rng.uniform(0.05, 0.5, m)
        x = mu + sd * rng.normal(0, 3, m)
        shift = rng.uniform(-50, 50, m)
        a_syn = Synopsis(0, 0, mu, sd, 50)
        b_syn = Synopsis(0, 0, mu + shift, sd, 50)
        for det in detectors.values():
            a, b = det(x, a_syn), det(x + shift, b_syn)
            if a.flagged != b.flagged or abs(a.confidence - b.confidence) > 1e-9:
                failures += 1
    criterion("C4b translation covariance, 3 detectors x 100 cases", failures == 0, f"{failures} failures")


# 5 -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def table_cells():
    manifest = ExperimentManifest()
    mats = {m: load_matrix(manifest.trace, m) for m in DIMS}
    cells = {}
    for n in NODES:
        for k in TOPK:
            for m in DIMS:
                t0 = time.perf_counter()
                report = run_cell(manifest, n, k, m, TABLE_W, mats[m])
                cells[n, k, m] = (report, time.perf_counter() - t0)
    return cells


def test_c5a_omega_large_n(criterion, table_cells):
    vals = {key: r.omega for key, (r, _) in table_cells.items() if key[0] in (50, 100)}
    criterion("C5a omega >= 0.95 for N in {50,100}", min(vals.values()) >= 0.95, f"min omega {min(vals.values()):.3f}")


def test_c5b_omega_small_n(criterion, table_cells):
    vals = [table_cells[10, k, 10][0].omega for k in TOPK]
    criterion("C5b omega >= 0.70 for N=10, M=10", min(vals) >= 0.70, f"omega {vals}")


def test_c5c_tau_grows_with_n(criterion, table_cells):
    pairs = {(k, m): (table_cells[10, k, m][0].tau, table_cells[100, k, m][0].tau) for k in TOPK for m in DIMS}
    ok = all(a < b for a, b in pairs.values())
    detail = ", ".join(f"k={k} M={m}: {a:.4f} vs {b:.4f}" for (k, m), (a, b) in pairs.items())
    criterion("C5c tau(N=10) < tau(N=100)", ok, detail)


def test_c5d_tau_grows_with_k(criterion, table_cells):
    pairs = {(n, m): (table_cells[n, 2, m][0].tau, table_cells[n, 5, m][0].tau) for n in NODES for m in DIMS}
    bad = [key for key, (a, b) in pairs.items() if not a <= b]
    criterion("C5d tau(k=2) <= tau(k=5)", not bad, f"violations {bad}")


def test_c5_cell_runtime(criterion, table_cells):
    slowest = max(t for _, t in table_cells.values())
    criterion("C5 each cell < 30 s", slowest < 30.0, f"slowest {slowest:.2f} s")


# 6 -----------------------------------------------------------------------


def test_c6_message_accounting(criterion):
    manifest = ExperimentManifest()
    for m in DIMS:
        cfg = PipelineConfig(nodes=10, topk=2, dims=m, window=TABLE_W).validate()
        warmup, stream = build_scenario(load_matrix(manifest.trace, m), 10, 1000, "regional", 0.01, 5.0, cfg.seed)
        net = EdgeNetwork(cfg)
        for i, vecs in enumerate(warmup):
            net.seed_dataset(i, vecs)
        targets = accepted = 0
        for ev in build_events(len(stream), cfg):
            if ev.kind is EventKind.EPOCH_TICK:
                net.epoch_tick(ev.payload)
                continue
            res = net.ingest(ev.target, stream[ev.payload].vector)
            if res.outcome is not RoutingOutcome.REJECTED_TO_CLOUD:
                accepted += 1
                targets += len(res.decision.targets)
        report, _ = run_experiment(cfg, stream, warmup)
        criterion(f"C6a repl = sum|targets| (M={m})", net.replication_messages == targets == report.replication_messages,
                  f"{report.replication_messages} vs {targets}")
        criterion(f"C6b repl in [1800, 2000] at N=10 k=2 (M={m})", 1800 <= report.replication_messages <= 2000,
                  f"{report.replication_messages} msgs, acceptance {report.accepted / 1000:.3f}")
        criterion(f"C6c baseline = accepted x (N-1) (M={m})", report.baseline_messages == accepted * 9,
                  f"{report.baseline_messages}")


# 7 -----------------------------------------------------------------------


def test_c7_throughput(criterion):
    manifest = ExperimentManifest()
    for k in TOPK:
        t0 = time.perf_counter()
        mat = load_matrix(manifest.trace, 10)
        report = run_cell(manifest, 100, k, 10, 50, mat)
        end_to_end = 1000 / (time.perf_counter() - t0)
        criterion(f"C7 throughput >= 160 vec/s at N=100 M=10 W=50 k={k}", end_to_end >= 160,
                  f"{end_to_end:.0f} vec/s end-to-end incl. setup, {report.vectors_per_sec:.0f} vec/s event loop")


# 8 -----------------------------------------------------------------------


def _csv_without_timing(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    drop = [i for i, name in enumerate(rows[0]) if name in TIMING_COLUMNS]
    return [[c for i, c in enumerate(r) if i not in drop] for r in rows]


def test_c8_determinism(criterion, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--out-dir", str(a)]) == 0
    assert main(["run", "--manifest", str(a / "manifest.toml"), "--out-dir", str(b)]) == 0
    files = sorted(p.name for p in a.glob("*.csv"))
    same = files == sorted(p.name for p in b.glob("*.csv"))
    for name in files:
        if name == "results.csv":
            same &= _csv_without_timing(a / name) == _csv_without_timing(b / name)
        else:
            same &= (a / name).read_bytes() == (b / name).read_bytes()
    criterion("C8 identical CSVs across reruns (timing excluded)", same, f"{len(files)} files compared")
