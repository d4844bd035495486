"""Trace loading, normalization, outlier injection and synthetic streams."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .model import ConfigurationError, DataVector

log = logging.getLogger(__name__)

SENTINELS = (-200.0,)
SENSOR_COLUMNS = ("PT08.S1(CO)", "PT08.S2(NMHC)", "PT08.S3(NOx)", "PT08.S4(NO2)", "PT08.S5(O3)")


@dataclass(frozen=True)
class LabeledVector:
    vector: DataVector
    is_injected_outlier: bool


@dataclass
class TraceTable:
    names: list
    data: np.ndarray  # rows x columns, NaN for missing
    skipped_rows: int = 0


def _parse_number(cell: str, decimal_comma: bool) -> Optional[float]:
    cell = cell.strip()
    if not cell:
        return None
    if decimal_comma:
        cell = cell.replace(",", ".")
    try:
        return float(cell)
    except ValueError:
        return None


def read_table(source: Union[str, Path, io.TextIOBase], sentinels=SENTINELS) -> TraceTable:
    """Parse delimited text into a float table of its numeric columns.

    Semicolon files are read with decimal commas (the reference trace's
    layout); comma files with decimal points. Columns that are mostly
    non-numeric (dates, times) are discarded. Sentinel values become NaN.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8", errors="replace")
    else:
        text = source.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigurationError("trace is empty")
    delim = ";" if lines[0].count(";") >= lines[0].count(",") and ";" in lines[0] else ","
    decimal_comma = delim == ";"
    rows = list(csv.reader(lines, delimiter=delim))

    first = rows[0]
    has_header = sum(_parse_number(c, decimal_comma) is not None for c in first) < len(
        [c for c in first if c.strip()]
    ) / 2
    if has_header:
        header, body = first, rows[1:]
    else:
        header, body = [f"col{i}" for i in range(len(first))], rows
    # trailing empty fields (";;") are not columns
    while header and not header[-1].strip():
        header = header[:-1]
    width = len(header)

    parsed, skipped = [], 0
    for r in body:
        cells = [c for c in r]
        while len(cells) > width and not cells[-1].strip():
            cells.pop()
        if len(cells) != width or all(not c.strip() for c in cells):
            skipped += 1
            continue
        parsed.append([_parse_number(c, decimal_comma) for c in cells])

    numeric_cols = []
    for j in range(width):
        ok = sum(row[j] is not None for row in parsed)
        if parsed and ok >= 0.5 * len(parsed):
            numeric_cols.append(j)
    data = np.full((len(parsed), len(numeric_cols)), np.nan)
    for i, row in enumerate(parsed):
        for k, j in enumerate(numeric_cols):
            v = row[j]
            if v is not None and v not in sentinels and math.isfinite(v):
                data[i, k] = v
    if skipped:
        log.info("skipped %d unparseable rows", skipped)
    return TraceTable([header[j].strip() for j in numeric_cols], data, skipped)


def minmax_normalize(data: np.ndarray) -> np.ndarray:
    """Per-column min-max scaling to [0, 1]; constant columns map to 0."""
    lo = np.nanmin(data, axis=0)
    span = np.nanmax(data, axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = (data - lo) / safe
    out[:, span == 0] = 0.0
    return out


def add_lags(data: np.ndarray, dims: int) -> np.ndarray:
    """Widen ``data`` to ``dims`` columns by appending lagged copies.

    Extra column ``c + i * C`` is base column ``c`` lagged by ``i + 1`` rows;
    the first rows, lacking history, are NaN.
    """
    n, c = data.shape
    cols = [data]
    extra = dims - c
    lag = 1
    while extra > 0:
        take = min(extra, c)
        shifted = np.full((n, take), np.nan)
        shifted[lag:] = data[:-lag, :take] if lag < n else np.nan
        cols.append(shifted)
        extra -= take
        lag += 1
    return np.hstack(cols)


def load_trace_matrix(
    path,
    dims: int,
    columns: Optional[Sequence[Union[str, int]]] = None,
    derive_lags: bool = False,
    max_missing: float = 0.25,
) -> np.ndarray:
    """Normalized ``rows x dims`` matrix from a delimited trace file.

    Without ``columns`` the first ``dims`` usable numeric columns are taken;
    a column is usable when at most ``max_missing`` of its values are
    missing. ``derive_lags`` fills any shortfall with lagged copies.
    """
    table = read_table(path)
    if columns is None:
        missing = np.isnan(table.data).mean(axis=0) if len(table.data) else np.ones(len(table.names))
        idx = [j for j in range(len(table.names)) if missing[j] <= max_missing]
    else:
        idx = []
        for c in columns:
            if isinstance(c, str):
                if c not in table.names:
                    raise ConfigurationError(f"column {c!r} not in trace ({table.names})")
                idx.append(table.names.index(c))
            else:
                idx.append(int(c))
    if len(idx) < dims:
        if not derive_lags or not idx:
            raise ConfigurationError(f"trace has {len(idx)} usable numeric columns, {dims} requested")
    base = table.data[:, idx[:dims]]
    if base.shape[1] < dims:
        base = add_lags(base, dims)
    keep = ~np.isnan(base).any(axis=1)
    dropped = int((~keep).sum())
    if dropped:
        log.info("dropped %d rows with missing values", dropped)
    base = base[keep]
    if base.shape[0] == 0:
        raise ConfigurationError("no complete rows left in trace")
    return minmax_normalize(base)


def load_trace(path, dims: int, columns=None, derive_lags: bool = False) -> list:
    mat = load_trace_matrix(path, dims, columns=columns, derive_lags=derive_lags)
    return [DataVector(row, sequence_id=i) for i, row in enumerate(mat)]


def inject_outliers(trace: Sequence[DataVector], rate: float, magnitude: float = 5.0, seed: int = 0) -> list:
    """Label ``floor(rate * len)`` seeded positions as outliers and displace them.

    Each chosen vector is moved, per dimension and with a random sign, to at
    least ``magnitude`` column standard deviations away from the column
    mean. Values are not clipped back into the data range.
    """
    if not 0 <= rate <= 1:
        raise ConfigurationError(f"rate={rate} must lie in [0, 1]")
    if not magnitude > 3:
        raise ConfigurationError(f"magnitude={magnitude} must exceed 3 sigma")
    n = len(trace)
    count = int(math.floor(rate * n + 1e-9))
    if count == 0 or n == 0:
        return [LabeledVector(v, False) for v in trace]
    mat = np.vstack([v.values for v in trace])
    mu, sd = mat.mean(axis=0), mat.std(axis=0)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=count, replace=False))
    signs = rng.choice([-1.0, 1.0], size=(count, mat.shape[1]))
    out = [LabeledVector(v, False) for v in trace]
    for pos, sign in zip(chosen, signs):
        v = trace[pos]
        dev = np.abs(v.values - mu) + magnitude * sd
        moved = mu + sign * dev
        out[pos] = LabeledVector(DataVector(moved, v.source_node, v.sequence_id), True)
    return out


def synth_stream(count: int, dims: int, specs: Sequence[tuple], seed: int = 0) -> list:
    """Independent columns drawn from ``("uniform", a, b)`` or ``("gaussian", mu, sigma)`` specs."""
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    if len(specs) != dims:
        raise ConfigurationError(f"{len(specs)} specs given for {dims} dimensions")
    rng = np.random.default_rng(seed)
    cols = []
    for spec in specs:
        kind, a, b = spec
        if kind == "uniform":
            if not a <= b:
                raise ConfigurationError(f"uniform({a}, {b}) needs a <= b")
            cols.append(rng.uniform(a, b, size=count))
        elif kind == "gaussian":
            if not b >= 0:
                raise ConfigurationError(f"gaussian sigma={b} must be >= 0")
            cols.append(rng.normal(a, b, size=count) if b > 0 else np.full(count, float(a)))
        else:
            raise ConfigurationError(f"unknown distribution {kind!r}")
    mat = np.column_stack(cols)
    return [DataVector(row, sequence_id=i) for i, row in enumerate(mat)]


# --- surrogate of the air-quality sensor trace ------------------------------

_HEADER = [
    "Date", "Time", "CO(GT)", "PT08.S1(CO)", "NMHC(GT)", "C6H6(GT)", "PT08.S2(NMHC)",
    "NOx(GT)", "PT08.S3(NOx)", "NO2(GT)", "PT08.S4(NO2)", "PT08.S5(O3)", "T", "RH", "AH",
]


def _ar1(rng, n, phi, scale):
    e = rng.normal(0.0, scale * math.sqrt(1 - phi * phi), size=n)
    out = np.empty(n)
    out[0] = rng.normal(0.0, scale)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + e[i]
    return out


def _gap_mask(rng, n, n_missing, mean_gap):
    mask = np.zeros(n, dtype=bool)
    while mask.sum() < n_missing:
        length = min(max(1, int(rng.exponential(mean_gap))), n)
        start = int(rng.integers(0, max(n - length, 1)))
        mask[start : start + length] = True
    return mask


def surrogate_air_quality(path=None, rows: int = 9358, seed: int = 2004) -> str:
    """Write a synthetic stand-in for the hourly multisensor air-quality trace.

    Layout follows the public file: semicolon separated, decimal commas,
    ``-200`` for missing values, Date/Time columns, reference analyzer
    columns, five metal-oxide sensor responses and weather columns. Hourly
    rows start 10 March 2004 18:00. The generating model has a two-peak
    traffic cycle, a weekend dip, an August holiday dip, seasonal weather,
    slow sensor drift and AR(1) noise. Returns the text; also writes it to
    ``path`` when given.
    """
    rng = np.random.default_rng(seed)
    start = datetime(2004, 3, 10, 18)
    stamps = [start + timedelta(hours=i) for i in range(rows)]
    hour = np.array([t.hour for t in stamps], dtype=float)
    dow = np.array([t.weekday() for t in stamps])
    doy = np.array([t.timetuple().tm_yday for t in stamps], dtype=float)
    month = np.array([t.month for t in stamps])
    frac = np.arange(rows) / rows

    diurnal = 0.25 + 0.9 * np.exp(-0.5 * ((hour - 8.5) / 1.6) ** 2) + 0.8 * np.exp(-0.5 * ((hour - 19.0) / 2.2) ** 2)
    weekly = np.where(dow >= 5, 0.65, 1.0)
    holiday = np.where(month == 8, 0.6, 1.0)
    traffic = diurnal * weekly * holiday * np.exp(_ar1(rng, rows, 0.85, 0.25))

    season = np.cos(2 * math.pi * (doy - 200) / 365.0)  # +1 mid-July
    temp = 18.0 + 11.0 * season + 4.0 * np.sin(2 * math.pi * (hour - 9) / 24.0) + _ar1(rng, rows, 0.9, 2.0)
    rh = np.clip(50.0 - 1.2 * (temp - 18.0) + _ar1(rng, rows, 0.9, 10.0), 8.0, 90.0)
    ah = 6.112 * np.exp(17.67 * temp / (temp + 243.5)) * rh * 2.1674 / (273.15 + temp) / 100.0
    winter = 1.0 + 0.6 * np.clip(-season, 0, None)

    co = np.clip(0.3 + 2.3 * traffic * winter * np.exp(rng.normal(0, 0.15, rows)), 0.1, None)
    c6h6 = np.clip(0.5 + 11.0 * traffic * np.exp(rng.normal(0, 0.2, rows)), 0.1, None)
    nmhc = np.clip(40 + 250 * traffic * np.exp(rng.normal(0, 0.25, rows)), 7, None)
    nox = np.clip(30 + 260 * traffic * winter * np.exp(rng.normal(0, 0.2, rows)), 2, None)
    no2 = np.clip(25 + 75 * traffic * np.exp(rng.normal(0, 0.2, rows)) + 10 * winter, 2, None)

    drift = 1.0 + 0.08 * frac
    s1 = (650 + 210 * co**0.8 + 2.0 * (rh - 50) + rng.normal(0, 35, rows)) * drift
    s2 = 420 + 95 * c6h6**0.75 + rng.normal(0, 30, rows)
    s3 = 2300 / (1 + nox / 170.0) ** 0.75 + 3.0 * (temp - 18) + rng.normal(0, 40, rows)
    s4 = (1050 + 22 * (temp - 18) + 3.2 * no2 + 4 * (ah - 1) * 10 + rng.normal(0, 45, rows)) / drift
    s5 = 350 + 420 * co**0.9 + 0.8 * nox + rng.normal(0, 60, rows)

    cols = {
        "CO(GT)": co, "PT08.S1(CO)": s1, "NMHC(GT)": nmhc, "C6H6(GT)": c6h6,
        "PT08.S2(NMHC)": s2, "NOx(GT)": nox, "PT08.S3(NOx)": s3, "NO2(GT)": no2,
        "PT08.S4(NO2)": s4, "PT08.S5(O3)": s5, "T": temp, "RH": rh, "AH": ah,
    }
    device_down = _gap_mask(rng, rows, round(366 * rows / 9358), 20.0)
    missing = {name: device_down.copy() for name in cols}
    for name, share, gap in (("CO(GT)", 0.18, 30.0), ("NOx(GT)", 0.17, 30.0), ("NO2(GT)", 0.17, 30.0)):
        missing[name] |= _gap_mask(rng, rows, int(share * rows), gap)
    missing["NMHC(GT)"] = np.arange(rows) >= 914

    decimals = {"PT08.S1(CO)": 0, "PT08.S2(NMHC)": 0, "PT08.S3(NOx)": 0, "PT08.S4(NO2)": 0,
                "PT08.S5(O3)": 0, "NMHC(GT)": 0, "NOx(GT)": 0, "NO2(GT)": 0, "AH": 4}

    def fmt(name, v, miss):
        if miss:
            return "-200"
        d = decimals.get(name, 1)
        s = f"{v:.{d}f}" if d else str(int(round(v)))
        return s.replace(".", ",")

    buf = io.StringIO()
    buf.write(";".join(_HEADER) + ";;\n")
    for i, t in enumerate(stamps):
        fields = [t.strftime("%d/%m/%Y"), t.strftime("%H.%M.%S")]
        fields += [fmt(n, cols[n][i], missing[n][i]) for n in _HEADER[2:]]
        buf.write(";".join(fields) + ";;\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
