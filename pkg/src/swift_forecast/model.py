"""Forecaster forward pass and its exact reverse-mode gradient.

Pipeline (per channel, channel-independent):

    normalize -> single-level DWT -> cross-band residual conv
              -> shared/split mapping head -> IDWT -> denormalize

Input rows are treated as independent channels.  A batch of B windows with
N channels is fed as a (B*N) x T matrix (row r belongs to channel r mod N,
which matters only for per-channel parameters: the learnable-affine norm
and the per-channel-head ablation).

Everything runs in float64.  The analysis/synthesis transforms are fixed
orthogonal linear maps, so their adjoints are each other; all remaining
gradients are derived by hand and verified against finite differences in
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CacheError, ConfigError, DataError, ShapeError
from .wavelet import (
    BandTensor,
    FilterPair,
    SUPPORTED_WAVELETS,
    dwt1,
    idwt1,
    lazy_merge,
    lazy_split,
    make_filters,
)

REVIN_EPS = 1e-5
KERNEL_MENU = (3, 9, 13, 17)
HEADS = ("linear", "mlp")
HEAD_MODES = ("share", "split")
NORMS = ("mean", "revin", "none")


class ModelError(DataError):
    """Degenerate learned state (e.g. zero affine scale)."""

    code = "model"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``per_channel_head`` replicates the head weights per channel (the
    channel-independence ablation); ``dwt_bypass`` replaces the wavelet
    analysis/synthesis with a plain even/odd polyphase split (the
    transform ablation).  Both default to the published model.
    """

    lookback: int
    horizon: int
    kernel_size: int
    head: str = "linear"
    head_mode: str = "share"
    norm: str = "mean"
    wavelet: str = "haar"
    channels: int = 1
    mlp_hidden: Optional[int] = None
    per_channel_head: bool = False
    dwt_bypass: bool = False

    def __post_init__(self):
        t, s, k = self.lookback, self.horizon, self.kernel_size
        if t <= 0 or t % 2 != 0:
            raise ConfigError(f"lookback must be positive even, got {t}")
        if s <= 0 or s % 2 != 0:
            raise ConfigError(f"horizon must be positive even, got {s}")
        if k not in KERNEL_MENU:
            raise ConfigError(f"kernel_size must be one of {KERNEL_MENU}, got {k}")
        if k > t // 2:
            raise ConfigError(f"kernel_size {k} exceeds half lookback {t // 2}")
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}, got '{self.head}'")
        if self.head_mode not in HEAD_MODES:
            raise ConfigError(f"head_mode must be one of {HEAD_MODES}, got '{self.head_mode}'")
        if self.norm not in NORMS:
            raise ConfigError(f"norm must be one of {NORMS}, got '{self.norm}'")
        if self.wavelet not in SUPPORTED_WAVELETS:
            raise ConfigError(f"wavelet must be one of {SUPPORTED_WAVELETS}, got '{self.wavelet}'")
        if self.channels < 1:
            raise ConfigError(f"channels must be >= 1, got {self.channels}")
        if self.mlp_hidden is not None and self.mlp_hidden < 1:
            raise ConfigError(f"mlp_hidden must be >= 1, got {self.mlp_hidden}")

    @property
    def hidden(self) -> int:
        # default MLP width: the lookback length
        return self.mlp_hidden if self.mlp_hidden is not None else self.lookback

    @property
    def half_in(self) -> int:
        return self.lookback // 2

    @property
    def half_out(self) -> int:
        return self.horizon // 2


@dataclass
class SwiftModel:
    """Configuration plus all learnable parameter tensors, keyed by name."""

    config: ModelConfig
    params: dict

    @property
    def filters(self) -> FilterPair:
        return make_filters(self.config.wavelet)


@dataclass
class NormStats:
    """Per-row statistics captured by normalize, needed to invert it."""

    mode: str
    mean: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None  # sqrt(var + eps), revin only


@dataclass
class ForwardCache:
    """Intermediates for one backward pass; single use."""

    rows: int
    stats: NormStats
    norm_z: Optional[np.ndarray]  # (R, T) standardized input, revin only
    conv_padded: np.ndarray  # (R, 2, L + k - 1) zero-padded conv input
    head_in: np.ndarray  # (2R, L) stacked [approx; detail] head input
    head_aux: dict  # head-specific intermediates
    body_out: np.ndarray  # (R, horizon) output before denormalize
    consumed: bool = field(default=False)


def param_shapes(cfg: ModelConfig) -> dict:
    """Canonical (ordered) name -> shape map of all learnable tensors."""
    shapes: dict = {}
    if cfg.norm == "revin":
        shapes["gamma"] = (cfg.channels,)
        shapes["beta"] = (cfg.channels,)
    shapes["conv_w"] = (2, 2, cfg.kernel_size)
    shapes["conv_b"] = (2,)
    l, s, h = cfg.half_in, cfg.half_out, cfg.hidden
    lead = (cfg.channels,) if cfg.per_channel_head else ()
    bands = ("",) if cfg.head_mode == "share" else ("_lo", "_hi")
    for suffix in bands:
        if cfg.head == "linear":
            shapes[f"head_w{suffix}"] = lead + (l, s)
            shapes[f"head_b{suffix}"] = lead + (s,)
        else:
            shapes[f"head_w1{suffix}"] = lead + (l, h)
            shapes[f"head_b1{suffix}"] = lead + (h,)
            shapes[f"head_w2{suffix}"] = lead + (h, s)
            shapes[f"head_b2{suffix}"] = lead + (s,)
    return shapes


def _fan_in(name: str, cfg: ModelConfig) -> int:
    if name.startswith("conv_w"):
        return 2 * cfg.kernel_size
    if name.startswith("head_w2"):
        return cfg.hidden
    return cfg.half_in


def init_model(cfg: ModelConfig, seed: int) -> SwiftModel:
    """Deterministic init: weights uniform +-1/sqrt(fan_in), biases zero,
    affine scale one.  Tensors are drawn in the canonical param order, so
    the same (cfg, seed) always yields bit-identical parameters."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name == "gamma":
            params[name] = np.ones(shape)
        elif "_w" in name:
            bound = 1.0 / np.sqrt(_fan_in(name, cfg))
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = np.zeros(shape)
    return SwiftModel(config=cfg, params=params)


def _check_rows(rows: int, cfg: ModelConfig, needed: bool) -> int:
    if not needed:
        return 1
    if rows % cfg.channels != 0:
        raise ShapeError(
            f"{rows} rows not divisible by {cfg.channels} channels; "
            "per-channel parameters need complete channel blocks"
        )
    return rows // cfg.channels


def _tile(vec: np.ndarray, rows: int, cfg: ModelConfig) -> np.ndarray:
    return np.tile(vec, _check_rows(rows, cfg, True))


def _untile(per_row: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    # reduce a (R,) per-row quantity to per-channel by summing channel blocks
    return per_row.reshape(-1, cfg.channels).sum(axis=0)


def normalize(x: np.ndarray, model: SwiftModel):
    """Instance normalization.  Returns (x_tilde, stats)."""
    xt, stats, _ = _normalize(x, model)
    return xt, stats


def _normalize(x: np.ndarray, model: SwiftModel):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected an N x T matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("input contains non-finite values")
    mode = model.config.norm
    if mode == "none":
        return x, NormStats("none"), None
    mean = x.mean(axis=1)
    if mode == "mean":
        return x - mean[:, None], NormStats("mean", mean=mean), None
    sigma = np.sqrt(x.var(axis=1) + REVIN_EPS)
    z = (x - mean[:, None]) / sigma[:, None]
    cfg = model.config
    g = _tile(model.params["gamma"], x.shape[0], cfg)
    b = _tile(model.params["beta"], x.shape[0], cfg)
    return g[:, None] * z + b[:, None], NormStats("revin", mean=mean, sigma=sigma), z


def denormalize(y_norm: np.ndarray, stats: NormStats, model: SwiftModel) -> np.ndarray:
    """Invert :func:`normalize` on the model output scale."""
    y_norm = np.asarray(y_norm, dtype=np.float64)
    if stats.mode == "none":
        return y_norm
    if stats.mode == "mean":
        return y_norm + stats.mean[:, None]
    gamma = model.params["gamma"]
    if np.any(gamma == 0.0):
        raise ModelError("degenerate affine: gamma contains zeros")
    cfg = model.config
    g = _tile(gamma, y_norm.shape[0], cfg)
    b = _tile(model.params["beta"], y_norm.shape[0], cfg)
    return (y_norm - b[:, None]) / g[:, None] * stats.sigma[:, None] + stats.mean[:, None]


# -- cross-band residual convolution ----------------------------------------


def band_mix(y: BandTensor, model: SwiftModel) -> BandTensor:
    """Length-preserving 2-channel conv over the band pair, plus residual."""
    out, _ = _band_mix_forward(y, model)
    return out


def _band_mix_forward(y: BandTensor, model: SwiftModel):
    k = model.config.kernel_size
    if y.half_len < k:
        raise ShapeError(f"kernel size {k} larger than band length {y.half_len}")
    pad = (k - 1) // 2
    arr = np.stack([y.approx, y.detail], axis=1)  # (R, 2, L)
    padded = np.zeros((arr.shape[0], 2, y.half_len + 2 * pad))
    padded[:, :, pad : pad + y.half_len] = arr
    win = sliding_window_view(padded, k, axis=2)  # (R, 2, L, k)
    conv = np.einsum("oik,rilk->rol", model.params["conv_w"], win)
    out = conv + model.params["conv_b"].reshape(1, 2, 1) + arr
    return BandTensor(approx=out[:, 0], detail=out[:, 1]), padded


def _band_mix_backward(g_out: np.ndarray, padded: np.ndarray, model: SwiftModel):
    # g_out: (R, 2, L) gradient of the mixed bands
    w = model.params["conv_w"]
    k = w.shape[2]
    pad = (k - 1) // 2
    length = g_out.shape[2]
    win = sliding_window_view(padded, k, axis=2)
    grad_w = np.einsum("rol,rilk->oik", g_out, win)
    grad_b = g_out.sum(axis=(0, 2))
    g_pad = np.zeros_like(padded)
    for j in range(k):
        g_pad[:, :, j : j + length] += np.einsum("oi,rol->ril", w[:, :, j], g_out)
    g_in = g_pad[:, :, pad : pad + length] + g_out  # conv path + residual path
    return g_in, grad_w, grad_b


# -- mapping head ------------------------------------------------------------


def _affine(x: np.ndarray, w: np.ndarray, b: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    if w.ndim == 2:
        return x @ w + b
    blocks = _check_rows(x.shape[0], cfg, True)
    x3 = x.reshape(blocks, cfg.channels, -1)
    out = np.einsum("bnl,nls->bns", x3, w) + b[None]
    return out.reshape(x.shape[0], -1)


def _affine_backward(g: np.ndarray, x: np.ndarray, w: np.ndarray, cfg: ModelConfig):
    if w.ndim == 2:
        return g @ w.T, x.T @ g, g.sum(axis=0)
    blocks = x.shape[0] // cfg.channels
    x3 = x.reshape(blocks, cfg.channels, -1)
    g3 = g.reshape(blocks, cfg.channels, -1)
    grad_w = np.einsum("bnl,bns->nls", x3, g3)
    grad_b = g3.sum(axis=0)
    g_in = np.einsum("bns,nls->bnl", g3, w).reshape(x.shape)
    return g_in, grad_w, grad_b


def head_map(yc: BandTensor, model: SwiftModel) -> BandTensor:
    """Map both bands from length T/2 to T'/2 with the configured head."""
    stacked = np.concatenate([yc.approx, yc.detail], axis=0)
    out, _ = _head_forward(stacked, model)
    r = yc.approx.shape[0]
    return BandTensor(approx=out[:r], detail=out[r:])


def _head_forward(stacked: np.ndarray, model: SwiftModel):
    """Head on the (2R, L) stacked band matrix; returns (out, aux)."""
    cfg = model.config
    if stacked.shape[1] != cfg.half_in:
        raise ShapeError(f"head expects width {cfg.half_in}, got {stacked.shape[1]}")
    p = model.params
    aux: dict = {}
    if cfg.head_mode == "share":
        if cfg.head == "linear":
            return _affine(stacked, p["head_w"], p["head_b"], cfg), aux
        pre = _affine(stacked, p["head_w1"], p["head_b1"], cfg)
        hidden = np.maximum(pre, 0.0)
        aux["pre"] = pre
        aux["hidden"] = hidden
        return _affine(hidden, p["head_w2"], p["head_b2"], cfg), aux
    r = stacked.shape[0] // 2
    halves = {"_lo": stacked[:r], "_hi": stacked[r:]}
    outs = []
    for sfx, part in halves.items():
        if cfg.head == "linear":
            outs.append(_affine(part, p[f"head_w{sfx}"], p[f"head_b{sfx}"], cfg))
        else:
            pre = _affine(part, p[f"head_w1{sfx}"], p[f"head_b1{sfx}"], cfg)
            hidden = np.maximum(pre, 0.0)
            aux[f"pre{sfx}"] = pre
            aux[f"hidden{sfx}"] = hidden
            outs.append(_affine(hidden, p[f"head_w2{sfx}"], p[f"head_b2{sfx}"], cfg))
    return np.concatenate(outs, axis=0), aux


def _head_backward(g_out: np.ndarray, stacked: np.ndarray, aux: dict, model: SwiftModel, grads: dict):
    cfg = model.config
    p = model.params
    if cfg.head_mode == "share":
        if cfg.head == "linear":
            g_in, gw, gb = _affine_backward(g_out, stacked, p["head_w"], cfg)
            grads["head_w"] += gw
            grads["head_b"] += gb
            return g_in
        g_h, gw2, gb2 = _affine_backward(g_out, aux["hidden"], p["head_w2"], cfg)
        grads["head_w2"] += gw2
        grads["head_b2"] += gb2
        g_pre = g_h * (aux["pre"] > 0.0)
        g_in, gw1, gb1 = _affine_backward(g_pre, stacked, p["head_w1"], cfg)
        grads["head_w1"] += gw1
        grads["head_b1"] += gb1
        return g_in
    r = stacked.shape[0] // 2
    pieces = []
    for sfx, sl in (("_lo", slice(0, r)), ("_hi", slice(r, 2 * r))):
        g_part, x_part = g_out[sl], stacked[sl]
        if cfg.head == "linear":
            g_in, gw, gb = _affine_backward(g_part, x_part, p[f"head_w{sfx}"], cfg)
            grads[f"head_w{sfx}"] += gw
            grads[f"head_b{sfx}"] += gb
        else:
            g_h, gw2, gb2 = _affine_backward(g_part, aux[f"hidden{sfx}"], p[f"head_w2{sfx}"], cfg)
            grads[f"head_w2{sfx}"] += gw2
            grads[f"head_b2{sfx}"] += gb2
            g_pre = g_h * (aux[f"pre{sfx}"] > 0.0)
            g_in, gw1, gb1 = _affine_backward(g_pre, x_part, p[f"head_w1{sfx}"], cfg)
            grads[f"head_w1{sfx}"] += gw1
            grads[f"head_b1{sfx}"] += gb1
        pieces.append(g_in)
    return np.concatenate(pieces, axis=0)


# -- full pipeline -----------------------------------------------------------


def _analyze(x: np.ndarray, model: SwiftModel) -> BandTensor:
    if model.config.dwt_bypass:
        return lazy_split(x)
    return dwt1(x, model.filters)


def _synthesize(bands: BandTensor, model: SwiftModel) -> np.ndarray:
    if model.config.dwt_bypass:
        return lazy_merge(bands)
    return idwt1(bands, model.filters)


def forward(x: np.ndarray, model: SwiftModel):
    """Run the pipeline.  Returns (prediction, cache for one backward)."""
    cfg = model.config
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.lookback:
        raise ShapeError(f"expected rows x {cfg.lookback}, got shape {x.shape}")
    _check_rows(x.shape[0], cfg, cfg.norm == "revin" or cfg.per_channel_head)
    xt, stats, z = _normalize(x, model)
    bands = _analyze(xt, model)
    mixed, padded = _band_mix_forward(bands, model)
    head_in = np.concatenate([mixed.approx, mixed.detail], axis=0)
    head_out, head_aux = _head_forward(head_in, model)
    r = x.shape[0]
    body = _synthesize(BandTensor(approx=head_out[:r], detail=head_out[r:]), model)
    y = denormalize(body, stats, model)
    cache = ForwardCache(
        rows=r,
        stats=stats,
        norm_z=z,
        conv_padded=padded,
        head_in=head_in,
        head_aux=head_aux,
        body_out=body,
    )
    return y, cache


def backward(cache: ForwardCache, model: SwiftModel, grad_y: np.ndarray) -> dict:
    """Gradients of every learnable parameter for the cached forward."""
    if cache.consumed:
        raise CacheError("forward cache already consumed by a backward pass")
    cache.consumed = True
    grad_y = np.asarray(grad_y, dtype=np.float64)
    if not np.all(np.isfinite(grad_y)):
        raise DataError("output gradient contains non-finite values")
    cfg = model.config
    r = cache.rows
    if grad_y.shape != (r, cfg.horizon):
        raise ShapeError(f"expected gradient shape {(r, cfg.horizon)}, got {grad_y.shape}")
    grads = {name: np.zeros(shape) for name, shape in param_shapes(cfg).items()}

    stats = cache.stats
    if stats.mode == "revin":
        gamma = _tile(model.params["gamma"], r, cfg)
        beta = _tile(model.params["beta"], r, cfg)
        scale = stats.sigma / gamma  # (R,)
        # y = (body - beta)/gamma * sigma + mean
        grads["beta"] += _untile(grad_y.sum(axis=1) * (-scale), cfg)
        resid = cache.body_out - beta[:, None]
        grads["gamma"] += _untile(
            (grad_y * resid).sum(axis=1) * (-stats.sigma / gamma**2), cfg
        )
        g_body = grad_y * scale[:, None]
    else:
        g_body = grad_y  # mean shift has no parameters

    out_bands = _analyze(g_body, model)  # adjoint of synthesis
    g_head_out = np.concatenate([out_bands.approx, out_bands.detail], axis=0)
    g_head_in = _head_backward(g_head_out, cache.head_in, cache.head_aux, model, grads)
    g_mixed = np.stack([g_head_in[:r], g_head_in[r:]], axis=1)
    g_bands, grad_cw, grad_cb = _band_mix_backward(g_mixed, cache.conv_padded, model)
    grads["conv_w"] += grad_cw
    grads["conv_b"] += grad_cb

    if stats.mode == "revin":
        g_xt = _synthesize(BandTensor(approx=g_bands[:, 0], detail=g_bands[:, 1]), model)
        grads["gamma"] += _untile((g_xt * cache.norm_z).sum(axis=1), cfg)
        grads["beta"] += _untile(g_xt.sum(axis=1), cfg)
    return grads


# -- size accounting ---------------------------------------------------------


def count_params(model: SwiftModel) -> int:
    """Exact number of learnable scalars."""
    return int(sum(p.size for p in model.params.values()))


def count_macs(model: SwiftModel) -> dict:
    """Component-wise multiply-accumulate counts for one forward pass over
    all ``channels`` rows.

    head: every row maps two length-T/2 bands to T'/2 (and through the
    hidden layer for the MLP head); weight sharing does not change the
    count.  conv: 2x2xk kernel over T/2 positions.  norm: one MAC per
    element per statistics/restore pass (mean: T + T'; revin adds the
    variance and scale passes).  Bias adds and the fixed transforms are
    not counted.
    """
    cfg = model.config
    n, l, s = cfg.channels, cfg.half_in, cfg.half_out
    if cfg.head == "linear":
        head = 2 * n * l * s
    else:
        head = 2 * n * (l * cfg.hidden + cfg.hidden * s)
    conv = 4 * cfg.kernel_size * l * n
    if cfg.norm == "mean":
        norm = n * (cfg.lookback + cfg.horizon)
    elif cfg.norm == "revin":
        norm = n * (3 * cfg.lookback + 2 * cfg.horizon)
    else:
        norm = 0
    return {"head": head, "conv": conv, "norm": norm, "total": head + conv + norm}
