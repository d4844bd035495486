"""Experiment manifests, scenario construction and grid execution."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from functools import lru_cache
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .ingest import SENSOR_COLUMNS, inject_outliers, load_trace_matrix, surrogate_air_quality
from .model import ConfigurationError, DataVector, PipelineConfig
from .simulator import ExperimentReport, run_experiment

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "N", "k", "M", "W", "omega", "tau", "repl_msgs", "syn_msgs", "baseline_msgs",
    "mean_sigma", "vectors_per_sec", "seed",
]
TIMING_COLUMNS = ("vectors_per_sec",)
SURROGATE = "surrogate"


@dataclass
class TraceSpec:
    path: str = SURROGATE
    columns: list = field(default_factory=lambda: list(SENSOR_COLUMNS))
    derive_lags: bool = True
    stream_length: int = 1000
    scenario: str = "regional"
    surrogate_seed: int = 2004


@dataclass
class InjectionSpec:
    rate: float = 0.01
    magnitude: float = 5.0


@dataclass
class GridSpec:
    nodes: list = field(default_factory=lambda: [10, 50, 100])
    topk: list = field(default_factory=lambda: [2, 5])
    dims: list = field(default_factory=lambda: [2, 10])
    window: list = field(default_factory=lambda: [10, 50])

    def cells(self):
        for n, k, m, w in itertools.product(self.nodes, self.topk, self.dims, self.window):
            if n > 1 and k > n - 1:
                raise ConfigurationError(f"grid.topk: k={k} is not below N={n}")
            yield n, k, m, w


@dataclass
class ExperimentManifest:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    trace: TraceSpec = field(default_factory=TraceSpec)
    injection: InjectionSpec = field(default_factory=InjectionSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    out_dir: str = "runs/latest"

    def validate(self) -> "ExperimentManifest":
        self.pipeline.validate()
        if self.trace.scenario not in SCENARIOS:
            raise ConfigurationError(f"trace.scenario: must be one of {sorted(SCENARIOS)}")
        if self.trace.stream_length < 1:
            raise ConfigurationError("trace.stream_length: must be >= 1")
        if not 0 <= self.injection.rate <= 1:
            raise ConfigurationError("injection.rate: must lie in [0, 1]")
        if not self.injection.magnitude > 3:
            raise ConfigurationError("injection.magnitude: must exceed 3")
        for name in ("nodes", "topk", "dims", "window"):
            if not getattr(self.grid, name):
                raise ConfigurationError(f"grid.{name}: needs at least one value")
        for n, k, m, w in self.grid.cells():
            try:
                replace(self.pipeline, nodes=n, topk=k, dims=m, window=w).validate()
            except ConfigurationError as exc:
                raise ConfigurationError(f"pipeline.{exc} (grid cell N={n} k={k} M={m} W={w})") from None
        return self

    def to_dict(self) -> dict:
        return {
            "out_dir": self.out_dir,
            "pipeline": self.pipeline.to_dict(),
            "trace": asdict(self.trace),
            "injection": asdict(self.injection),
            "grid": asdict(self.grid),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentManifest":
        def section(kind, key):
            raw = data.get(key, {})
            known = {f.name for f in fields(kind)}
            extra = set(raw) - known
            if extra:
                raise ConfigurationError(f"{key}: unknown fields {sorted(extra)}")
            return kind(**raw)

        extra = set(data) - {"out_dir", "pipeline", "trace", "injection", "grid"}
        if extra:
            raise ConfigurationError(f"unknown manifest sections {sorted(extra)}")
        try:
            pipeline = PipelineConfig.from_dict(data.get("pipeline", {}))
        except ConfigurationError as exc:
            raise ConfigurationError(f"pipeline.{exc}") from None
        return cls(
            pipeline=pipeline,
            trace=section(TraceSpec, "trace"),
            injection=section(InjectionSpec, "injection"),
            grid=section(GridSpec, "grid"),
            out_dir=data.get("out_dir", "runs/latest"),
        ).validate()

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "ExperimentManifest":
        return cls.from_dict(tomli.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        return cls.loads(Path(path).read_text())


# --- scenarios ------------------------------------------------------------


def _regional(mat, nodes, stream_length, rng):
    """Node i owns the i-th contiguous slice of the trace: its history, then its arrivals."""
    seg = len(mat) // nodes
    per = math.ceil(stream_length / nodes)
    if seg <= per:
        raise ConfigurationError(
            f"trace.stream_length: {len(mat)} rows cannot give {nodes} nodes {per} arrivals plus history"
        )
    slices = [mat[i * seg : (i + 1) * seg] for i in range(nodes)]
    warmup = [s[: seg - per] for s in slices]
    stream = np.array([slices[j % nodes][seg - per + j // nodes] for j in range(stream_length)])
    return warmup, stream


def _pooled(mat, nodes, stream_length, rng):
    """Arrivals are a random sample of the trace; the remainder is dealt round-robin as history."""
    if stream_length >= len(mat):
        raise ConfigurationError("trace.stream_length: exceeds trace length")
    idx = np.sort(rng.choice(len(mat), size=stream_length, replace=False))
    rest = np.delete(mat, idx, axis=0)
    return [rest[i::nodes] for i in range(nodes)], mat[idx]


def _cold(mat, nodes, stream_length, rng):
    """No history anywhere; a contiguous stretch of the trace is streamed."""
    if stream_length > len(mat):
        raise ConfigurationError("trace.stream_length: exceeds trace length")
    start = int(rng.integers(0, len(mat) - stream_length + 1))
    return None, mat[start : start + stream_length]


SCENARIOS = {"regional": _regional, "pooled": _pooled, "cold": _cold}


def build_scenario(mat: np.ndarray, nodes: int, stream_length: int, scenario: str,
                   rate: float, magnitude: float, seed: int):
    """Per-node history plus a labeled arrival stream, ready for round-robin delivery."""
    rng = np.random.default_rng(seed)
    warm, stream = SCENARIOS[scenario](mat, nodes, stream_length, rng)
    vecs = [DataVector(row, sequence_id=i) for i, row in enumerate(stream)]
    labeled = inject_outliers(vecs, rate, magnitude, seed)
    warmup = None if warm is None else [[DataVector(r) for r in w] for w in warm]
    return warmup, labeled


@lru_cache(maxsize=4)
def _surrogate_text(seed: int) -> str:
    return surrogate_air_quality(seed=seed)


def load_matrix(spec: TraceSpec, dims: int) -> np.ndarray:
    """Normalized trace matrix; the surrogate is generated in memory."""
    source = io.StringIO(_surrogate_text(spec.surrogate_seed)) if spec.path == SURROGATE else spec.path
    return load_trace_matrix(source, dims, columns=spec.columns or None, derive_lags=spec.derive_lags)


def run_cell(manifest: ExperimentManifest, n: int, k: int, m: int, w: int, mat: np.ndarray) -> ExperimentReport:
    cfg = replace(manifest.pipeline, nodes=n, topk=k, dims=m, window=w).validate()
    warmup, stream = build_scenario(
        mat, n, manifest.trace.stream_length, manifest.trace.scenario,
        manifest.injection.rate, manifest.injection.magnitude, cfg.seed,
    )
    report, _ = run_experiment(cfg, stream, warmup)
    return report


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def csv_row(n, k, m, w, report: ExperimentReport, seed: int) -> dict:
    return {
        "N": n, "k": k, "M": m, "W": w,
        "omega": fmt(report.omega), "tau": fmt(report.tau),
        "repl_msgs": report.replication_messages, "syn_msgs": report.synopsis_messages,
        "baseline_msgs": report.baseline_messages, "mean_sigma": fmt(report.mean_sigma),
        "vectors_per_sec": fmt(report.vectors_per_sec), "seed": seed,
    }


def write_stats(path: Path, report: ExperimentReport) -> None:
    dims = len(report.per_dataset_stats[0][0]) if report.per_dataset_stats else 0
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["dataset", "size"] + [f"mean_{j}" for j in range(dims)] + [f"std_{j}" for j in range(dims)])
        for i, (mu, sd, size) in enumerate(report.per_dataset_stats):
            wr.writerow([i, size] + [fmt(v) for v in mu] + [fmt(v) for v in sd])


def summary_table(rows: list) -> str:
    """omega and tau per window, one line per N, one column group per (k, M)."""
    by = {(int(r["N"]), int(r["k"]), int(r["M"]), int(r["W"])): r for r in rows}
    ns, ks, ms, ws = (sorted({key[i] for key in by}) for i in range(4))
    groups = [(k, m) for k in ks for m in ms]
    lines = []
    for w in ws:
        lines.append(f"W={w}")
        lines.append("     " + "".join(f" | {f'k={k} M={m}':^13}" for k, m in groups))
        lines.append("  N  " + "".join(f" | {'omega':>5} {'tau':>7}" for _ in groups))
        lines.append("-" * len(lines[-1]))
        for n in ns:
            cells = []
            for k, m in groups:
                r = by.get((n, k, m, w))
                cells.append(f" | {float(r['omega']):5.2f} {float(r['tau']):7.4f}" if r else " | " + " " * 13)
            lines.append(f"{n:5d}" + "".join(cells))
        lines.append("")
    return "\n".join(lines)


def run_grid(manifest: ExperimentManifest, out_dir=None, progress=None) -> list:
    """Run every grid cell; writes ``results.csv``, per-cell stats, ``summary.txt`` and the manifest."""
    manifest.validate()
    out = Path(out_dir or manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.toml").write_text(manifest.dumps())
    mats = {}
    rows = []
    for n, k, m, w in manifest.grid.cells():
        if m not in mats:
            mats[m] = load_matrix(manifest.trace, m)
        report = run_cell(manifest, n, k, m, w, mats[m])
        row = csv_row(n, k, m, w, report, manifest.pipeline.seed)
        rows.append(row)
        write_stats(out / f"stats_N{n}_k{k}_M{m}_W{w}.csv", report)
        log.info("cell N=%d k=%d M=%d W=%d: %d accepted, %d rejected", n, k, m, w, report.accepted, report.rejected)
        if progress:
            progress(row)
    with open(out / "results.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        wr.writeheader()
        wr.writerows(rows)
    (out / "summary.txt").write_text(summary_table(rows))
    return rows
