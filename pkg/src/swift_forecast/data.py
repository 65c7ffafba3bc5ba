"""CSV ingestion, canonical splits, standardization, sliding windows, and
the synthetic non-stationary generator."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError

# Community-convention split sizes for the hourly/minute benchmark files:
# 12/4/4 months of hourly rows, and the same in 15-minute rows.
ETT_HOURLY_ROWS = (8640, 2880, 2880)
ETT_MINUTE_ROWS = (34560, 11520, 11520)

STD_FLOOR = 1e-8


@dataclass
class RawSeries:
    """Channel-major series: values is N x L."""

    values: np.ndarray
    channel_names: list
    timestamps: Optional[list] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise DataError(f"series must be a nonempty N x L matrix, got {self.values.shape}")
        if len(self.channel_names) != self.values.shape[0]:
            raise DataError("number of channel names does not match channel count")
        if not np.all(np.isfinite(self.values)):
            raise DataError("series contains non-finite values")

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


def load_csv(path) -> RawSeries:
    """Load a comma-separated file with a header row.

    A first column whose header is "date" (case-insensitive) is kept as
    timestamps; all remaining columns must parse as finite floats.  Bad
    rows are reported by their 1-based line number in the file.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open '{path}': {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"'{path}' is empty") from None
        has_date = bool(header) and header[0].strip().lower() == "date"
        names = [h.strip() for h in (header[1:] if has_date else header)]
        if not names:
            raise DataError(f"'{path}' has no value columns")
        rows, stamps, bad = [], [], []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            data_cells = cells[1:] if has_date else cells
            if len(data_cells) != len(names):
                bad.append(lineno)
                continue
            try:
                parsed = [float(c) for c in data_cells]
            except ValueError:
                bad.append(lineno)
                continue
            if not all(np.isfinite(parsed)):
                bad.append(lineno)
                continue
            if has_date:
                stamps.append(cells[0])
            rows.append(parsed)
    if bad:
        shown = ", ".join(str(b) for b in bad[:20])
        more = "" if len(bad) <= 20 else f" (+{len(bad) - 20} more)"
        raise DataError(f"'{path}': unparsable or non-finite rows at lines {shown}{more}")
    if not rows:
        raise DataError(f"'{path}' has no data rows")
    values = np.asarray(rows, dtype=np.float64).T
    return RawSeries(values=values, channel_names=names, timestamps=stamps if has_date else None)


def write_csv(series: RawSeries, path) -> None:
    """Write a RawSeries in the same layout load_csv reads (lossless floats)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        has_date = series.timestamps is not None
        writer.writerow((["date"] if has_date else []) + list(series.channel_names))
        for i in range(series.length):
            row = [series.timestamps[i]] if has_date else []
            writer.writerow(row + [repr(float(v)) for v in series.values[:, i]])


@dataclass
class SplitSpec:
    """Contiguous, ordered (train, val, test) row ranges."""

    scheme: str
    train: tuple
    val: tuple
    test: tuple

    def __post_init__(self):
        tr, va, te = self.train, self.val, self.test
        if not (0 <= tr[0] < tr[1] <= va[0] <= va[1] <= te[0] <= te[1]):
            raise DataError(f"split ranges must be ordered and non-overlapping: {tr}, {va}, {te}")

    def range(self, part: str) -> tuple:
        return {"train": self.train, "val": self.val, "test": self.test}[part]


def split(raw: RawSeries, scheme: str) -> SplitSpec:
    """Canonical split boundaries; 'ratio' is 70/10/20 by floor."""
    length = raw.length
    if scheme in ("ett_hourly", "ett_minute"):
        tr, va, te = ETT_HOURLY_ROWS if scheme == "ett_hourly" else ETT_MINUTE_ROWS
        total = tr + va + te
        if length < total:
            raise DataError(f"scheme '{scheme}' needs {total} rows, file has {length}")
        return SplitSpec(scheme, (0, tr), (tr, tr + va), (tr + va, total))
    if scheme == "ratio":
        tr = int(0.7 * length)
        va = int(0.1 * length)
        if tr < 1:
            raise DataError(f"{length} rows is too short for a ratio split")
        return SplitSpec(scheme, (0, tr), (tr, tr + va), (tr + va, length))
    raise ConfigError(f"unknown split scheme '{scheme}'")


@dataclass
class Scaler:
    """Per-channel affine standardization fitted on the train range."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None]) / self.std[:, None]

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.std[:, None] + self.mean[:, None]


def standardize(raw: RawSeries, train_range: tuple):
    """Z-score every channel using train-range statistics only."""
    lo, hi = train_range
    seg = raw.values[:, lo:hi]
    if seg.shape[1] < 1:
        raise DataError("empty train range")
    mean = seg.mean(axis=1)
    std = seg.std(axis=1)
    flat = std < STD_FLOOR
    if np.any(flat):
        names = [raw.channel_names[i] for i in np.flatnonzero(flat)]
        warnings.warn(f"zero-variance channels {names}: std floored at {STD_FLOOR}")
        std = np.where(flat, STD_FLOOR, std)
    scaler = Scaler(mean=mean, std=std)
    scaled = RawSeries(
        values=scaler.transform(raw.values),
        channel_names=list(raw.channel_names),
        timestamps=raw.timestamps,
    )
    return scaled, scaler


def write_scaler(scaler: Scaler, names: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "mean", "std"])
        for name, m, s in zip(names, scaler.mean, scaler.std):
            writer.writerow([name, repr(float(m)), repr(float(s))])


def load_scaler(path) -> Scaler:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [(float(r[1]), float(r[2])) for r in reader if r]
    if not rows:
        raise DataError(f"'{path}' holds no scaler rows")
    arr = np.asarray(rows)
    return Scaler(mean=arr[:, 0], std=arr[:, 1])


def window_starts(lo: int, hi: int, lookback: int, horizon: int, stride: int = 1) -> np.ndarray:
    """Start indices of every (lookback, horizon) window inside [lo, hi)."""
    span = hi - lo
    if span < lookback + horizon:
        raise DataError(f"range of {span} rows too short for {lookback}+{horizon} windows")
    count = (span - lookback - horizon) // stride + 1
    return lo + stride * np.arange(count)


def gather_windows(values: np.ndarray, starts: np.ndarray, lookback: int, horizon: int):
    """Materialize (B, N, lookback) inputs and (B, N, horizon) targets."""
    xi = starts[:, None] + np.arange(lookback)[None, :]
    yi = starts[:, None] + lookback + np.arange(horizon)[None, :]
    return values[:, xi].transpose(1, 0, 2), values[:, yi].transpose(1, 0, 2)


@dataclass
class SplitData:
    """Standardized values plus split boundaries, ready for windowing.

    Validation/test window enumeration extends each range backward by
    lookback-1 rows so the earliest target of a held-out range still has a
    full history; the extension rows come from the preceding split and are
    used as inputs only.
    """

    values: np.ndarray
    spec: SplitSpec

    def starts(self, part: str, lookback: int, horizon: int, stride: int = 1) -> np.ndarray:
        lo, hi = self.spec.range(part)
        if part != "train":
            lo = max(lo - (lookback - 1), 0)
        return window_starts(lo, hi, lookback, horizon, stride)


@dataclass
class SynthParams:
    """Knobs of the synthetic non-stationary generator."""

    f0: float = 0.002
    f1: float = 0.02
    amp_slope: float = 0.5
    level_shift: float = 2.0
    noise: float = 0.1
    channels: int = 1

    def __post_init__(self):
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        if self.channels < 1:
            raise ConfigError(f"channels must be >= 1, got {self.channels}")


def synth_nonstationary(length: int, seed: int, params: Optional[SynthParams] = None) -> RawSeries:
    """Linear-chirp sinusoid with amplitude ramp, mid-series level shift,
    and seeded Gaussian noise:

        x(t) = (1 + a*t/L) * sin(2*pi*(f0*t + (f1-f0)/(2L)*t^2))
             + (0 if t < L/2 else shift) + noise * n(t)

    Channels beyond the first repeat the deterministic part with
    independent noise draws from the same generator.
    """
    p = params or SynthParams()
    if length < 4:
        raise ConfigError(f"length must be >= 4, got {length}")
    t = np.arange(length, dtype=np.float64)
    phase = p.f0 * t + (p.f1 - p.f0) / (2.0 * length) * t**2
    base = (1.0 + p.amp_slope * t / length) * np.sin(2.0 * np.pi * phase)
    base = base + np.where(t < length / 2.0, 0.0, p.level_shift)
    rng = np.random.default_rng(seed)
    values = base[None, :] + p.noise * rng.standard_normal((p.channels, length))
    names = [f"s{i}" for i in range(p.channels)]
    return RawSeries(values=values, channel_names=names)
