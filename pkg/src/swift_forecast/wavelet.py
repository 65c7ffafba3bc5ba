"""Single-level orthogonal discrete wavelet analysis/synthesis.

Conventions, fixed once for the whole package:

* Analysis is a correlation with stride 2 and periodic (circular) indexing::

      approx[c, k] = sum_n h_lo[n] * x[c, (2k + n) mod T]
      detail[c, k] = sum_n h_hi[n] * x[c, (2k + n) mod T]

  so both coefficient bands have length exactly T/2 for every supported
  filter.  For the 2-tap Haar pair no wraparound ever occurs.

* The bank is orthonormal, hence synthesis is the transpose of analysis::

      x[c, t] = sum_k approx[c, k] * h_lo[(t - 2k) mod T]
              + sum_k detail[c, k] * h_hi[(t - 2k) mod T]

* High-pass filters follow the quadrature relation
  ``h_hi[n] = (-1)^n * h_lo[2m - 1 - n]`` (filters have 2m taps), which for
  Haar gives h_hi = {1/sqrt2, -1/sqrt2}.

Low-pass coefficients for db2/sym4/coif1 come from the standard published
orthogonal-wavelet tables; they are never trusted blindly but re-checked
against the orthonormality and quadrature invariants on construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError, WaveletError

_SQRT2 = np.sqrt(2.0)

# Analysis low-pass taps, least-significant-lag first.  Haar is stored as
# exact 1/sqrt(2) constants; the rest are the usual published tables.
_LOWPASS: dict[str, tuple[float, ...]] = {
    "haar": (1.0 / _SQRT2, 1.0 / _SQRT2),
    "db2": (
        -0.12940952255092145,
        0.22414386804185735,
        0.836516303737469,
        0.48296291314469025,
    ),
    "sym4": (
        -0.07576571478927333,
        -0.02963552764599851,
        0.49761866763201545,
        0.8037387518059161,
        0.29785779560527736,
        -0.09921954357684722,
        -0.012603967262037833,
        0.0322231006040427,
    ),
    "coif1": (
        -0.01565572813546454,
        -0.0727326195128539,
        0.38486484686420286,
        0.8525720202122554,
        0.3378976624578092,
        -0.0727326195128539,
    ),
}

SUPPORTED_WAVELETS = tuple(_LOWPASS)


@dataclass(frozen=True)
class FilterPair:
    """Analysis filter pair of an orthonormal wavelet."""

    name: str
    h_lo: np.ndarray
    h_hi: np.ndarray

    def __post_init__(self):
        lo, hi = self.h_lo, self.h_hi
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size % 2 != 0 or lo.size < 2:
            raise WaveletError(f"filter pair must be two equal even-length taps, got {lo.shape}/{hi.shape}")
        if abs(np.dot(lo, lo) - 1.0) > 1e-12 or abs(np.dot(hi, hi) - 1.0) > 1e-12:
            raise WaveletError(f"{self.name}: filters are not orthonormal")
        signs = (-1.0) ** np.arange(lo.size)
        if np.max(np.abs(hi - signs * lo[::-1])) > 1e-12:
            raise WaveletError(f"{self.name}: quadrature relation violated")

    def __len__(self) -> int:
        return self.h_lo.size


@dataclass
class BandTensor:
    """Per-channel approximation/detail coefficient pair, each N x (T/2)."""

    approx: np.ndarray
    detail: np.ndarray

    def __post_init__(self):
        if self.approx.shape != self.detail.shape:
            raise ShapeError(f"band shapes differ: {self.approx.shape} vs {self.detail.shape}")
        if self.approx.ndim != 2 or self.approx.shape[1] < 1:
            raise ShapeError(f"bands must be N x half_len matrices, got {self.approx.shape}")

    @property
    def channels(self) -> int:
        return self.approx.shape[0]

    @property
    def half_len(self) -> int:
        return self.approx.shape[1]


def make_filters(name: str) -> FilterPair:
    """Return the analysis FilterPair for one of haar/db2/sym4/coif1."""
    taps = _LOWPASS.get(name)
    if taps is None:
        raise WaveletError(f"unsupported wavelet '{name}' (supported: {', '.join(SUPPORTED_WAVELETS)})")
    h_lo = np.asarray(taps, dtype=np.float64)
    signs = (-1.0) ** np.arange(h_lo.size)
    h_hi = signs * h_lo[::-1]
    return FilterPair(name=name, h_lo=h_lo, h_hi=h_hi)


def _check_input(x: np.ndarray, f: FilterPair) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected an N x T matrix, got shape {x.shape}")
    t = x.shape[1]
    if t % 2 != 0:
        raise ShapeError(f"series length {t} is odd; only even lengths are supported")
    if t < len(f):
        raise ShapeError(f"series length {t} shorter than the {len(f)}-tap filter")
    if not np.all(np.isfinite(x)):
        raise DataError("input contains non-finite values")
    return x


def dwt1(x: np.ndarray, f: FilterPair) -> BandTensor:
    """One analysis level: N x T -> two N x T/2 coefficient bands."""
    x = _check_input(x, f)
    n, t = x.shape
    half = t // 2
    approx = np.zeros((n, half))
    detail = np.zeros((n, half))
    base = 2 * np.arange(half)
    for tap in range(len(f)):
        col = x[:, (base + tap) % t]
        approx += f.h_lo[tap] * col
        detail += f.h_hi[tap] * col
    return BandTensor(approx=approx, detail=detail)


def idwt1(b: BandTensor, f: FilterPair) -> np.ndarray:
    """Exact synthesis inverse of :func:`dwt1` under periodization."""
    half = b.half_len
    t = 2 * half
    if t < len(f):
        raise ShapeError(f"band length {half} too short for the {len(f)}-tap filter")
    x = np.zeros((b.channels, t))
    base = 2 * np.arange(half)
    for tap in range(len(f)):
        # for fixed tap the target columns (2k + tap) mod t are all distinct
        x[:, (base + tap) % t] += f.h_lo[tap] * b.approx + f.h_hi[tap] * b.detail
    return x


def lazy_split(x: np.ndarray) -> BandTensor:
    """Polyphase even/odd split with the same shapes as :func:`dwt1`.

    Used by the transform-bypass ablation: no frequency decomposition
    happens, the series is merely de-interleaved.  Orthogonal permutation,
    so :func:`lazy_merge` is its exact inverse and adjoint.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] % 2 != 0:
        raise ShapeError(f"expected an N x even-T matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("input contains non-finite values")
    return BandTensor(approx=x[:, 0::2].copy(), detail=x[:, 1::2].copy())


def lazy_merge(b: BandTensor) -> np.ndarray:
    """Inverse of :func:`lazy_split`: re-interleave the two bands."""
    x = np.zeros((b.channels, 2 * b.half_len))
    x[:, 0::2] = b.approx
    x[:, 1::2] = b.detail
    return x
