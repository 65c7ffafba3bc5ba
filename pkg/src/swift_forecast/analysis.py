"""Trained-weight analysis: cosine similarity between the shared and
per-band head matrices, least-squares decomposition of the shared matrix,
and heatmap export."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AnalysisError, ConfigError, DataError

COND_LIMIT = 1e12


@dataclass
class WeightTriple:
    """Shared-head matrix plus the two split-head matrices, same shape."""

    w_s: np.ndarray
    w_l: np.ndarray
    w_h: np.ndarray

    def __post_init__(self):
        if not (self.w_s.shape == self.w_l.shape == self.w_h.shape):
            raise AnalysisError(
                f"matrix shapes differ: {self.w_s.shape}, {self.w_l.shape}, {self.w_h.shape}"
            )
        for m in (self.w_s, self.w_l, self.w_h):
            if not np.all(np.isfinite(m)):
                raise DataError("weight matrix contains non-finite values")


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Flattened cosine similarity, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise AnalysisError(f"shape mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise AnalysisError("cosine similarity undefined for zero-norm input")
    return float(np.dot(a, b) / (na * nb))


def _ols(regressors: np.ndarray, target: np.ndarray):
    gram = regressors.T @ regressors
    if np.linalg.cond(gram) > COND_LIMIT:
        raise AnalysisError("singular fit: regressors are collinear or degenerate")
    coef = np.linalg.solve(gram, regressors.T @ target)
    resid = target - regressors @ coef
    return coef, float(np.mean(resid * resid))


def lr_decompose(triple: WeightTriple):
    """Fit w_s ~ beta_l * w_l + beta_h * w_h + intercept over flat entries.

    Ordinary least squares via the normal equations with an explicit
    conditioning guard.  Returns (beta_l, beta_h, intercept, fit_mse).
    """
    y = triple.w_s.ravel()
    a = np.column_stack([triple.w_l.ravel(), triple.w_h.ravel(), np.ones(y.size)])
    coef, fit_mse = _ols(a, y)
    return float(coef[0]), float(coef[1]), float(coef[2]), fit_mse


def standardized_fit_mse(triple: WeightTriple) -> float:
    """Residual MSE of the same regression after z-scoring all three
    flattened matrices (scale-free quality of fit)."""

    def zscore(m):
        flat = m.ravel()
        sd = flat.std()
        if sd == 0.0:
            raise AnalysisError("cannot standardize a constant matrix")
        return (flat - flat.mean()) / sd

    y = zscore(triple.w_s)
    a = np.column_stack([zscore(triple.w_l), zscore(triple.w_h), np.ones(y.size)])
    _, fit_mse = _ols(a, y)
    return fit_mse


def export_heatmap(matrix: np.ndarray, path) -> None:
    """Write a min-max normalized grayscale PGM plus a CSV dump.

    ``path`` names the image; the CSV lands next to it with a .csv suffix.
    A constant matrix maps to mid-gray (all 128).  Output bytes depend
    only on the input values.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise AnalysisError(f"heatmap needs a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DataError("heatmap input contains non-finite values")
    lo, hi = float(m.min()), float(m.max())
    if hi > lo:
        pixels = np.rint((m - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pixels = np.full(m.shape, 128, dtype=np.uint8)
    path = Path(path)
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes())
    with open(path.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in m:
            writer.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [[float(c) for c in row] for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"'{path}' holds no matrix rows")
    return np.asarray(rows, dtype=np.float64)


def _head_matrices(model):
    cfg = model.config
    if cfg.head != "linear" or cfg.per_channel_head:
        raise ConfigError("weight analysis needs plain linear heads")
    if cfg.head_mode == "share":
        return {"w_s": model.params["head_w"]}
    return {"w_l": model.params["head_w_lo"], "w_h": model.params["head_w_hi"]}


def analyze_pair(share_model, split_model, out_dir=None) -> dict:
    """Compare a shared-head model against a split-head one.

    Accepts a second shared-head model in the split slot by tying
    w_l = w_h = w_s (flagged degenerate); in that case the collinear
    detail regressor is dropped from the decomposition.
    Writes report.csv and per-matrix heatmaps when out_dir is given.
    """
    share = _head_matrices(share_model)
    if "w_s" not in share:
        raise ConfigError("first model must use the shared head")
    other = _head_matrices(split_model)
    degenerate = "w_s" in other
    if degenerate:
        other = {"w_l": other["w_s"], "w_h": other["w_s"]}
    ca, cb = share_model.config, split_model.config
    if (ca.lookback, ca.horizon) != (cb.lookback, cb.horizon):
        raise ConfigError(
            f"config mismatch: lookback/horizon {(ca.lookback, ca.horizon)} vs "
            f"{(cb.lookback, cb.horizon)}"
        )
    triple = WeightTriple(w_s=share["w_s"], w_l=other["w_l"], w_h=other["w_h"])
    report = {
        "sim_sl": cosine_sim(triple.w_s, triple.w_l),
        "sim_sh": cosine_sim(triple.w_s, triple.w_h),
        "sim_lh": cosine_sim(triple.w_l, triple.w_h),
        "degenerate_detail": degenerate or np.array_equal(triple.w_l, triple.w_h),
    }
    if report["degenerate_detail"]:
        a = np.column_stack([triple.w_l.ravel(), np.ones(triple.w_s.size)])
        coef, fit_mse = _ols(a, triple.w_s.ravel())
        report.update(beta_l=float(coef[0]), beta_h=0.0, intercept=float(coef[1]), fit_mse=fit_mse)
        report["fit_mse_standardized"] = fit_mse
    else:
        beta_l, beta_h, intercept, fit_mse = lr_decompose(triple)
        report.update(beta_l=beta_l, beta_h=beta_h, intercept=intercept, fit_mse=fit_mse)
        report["fit_mse_standardized"] = standardized_fit_mse(triple)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["key", "value"])
            for key in sorted(report):
                writer.writerow([key, repr(report[key])])
        for name, mat in (("w_s", triple.w_s), ("w_l", triple.w_l), ("w_h", triple.w_h)):
            export_heatmap(mat, out / f"{name}.pgm")
    return report
