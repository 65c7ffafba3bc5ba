"""Loss, Adam, one-cycle learning-rate schedule, and the epoch loop with
validation-based model selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import SplitData, gather_windows
from .errors import ConfigError, ShapeError, TrainError
from .model import ModelConfig, SwiftModel, backward, forward, init_model, param_shapes


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    max_lr: float = 5e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    pct_start: float = 0.3
    div_factor: float = 25.0
    final_div_factor: float = 1e4
    seed: int = 2023
    patience: int = 3

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.pct_start < 1.0:
            raise ConfigError(f"pct_start must lie in (0, 1), got {self.pct_start}")
        if self.max_lr <= 0.0:
            raise ConfigError(f"max_lr must be positive, got {self.max_lr}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


def onecycle_lr(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Cosine one-cycle schedule.

    Closed form: with init = max_lr/div_factor, floor = max_lr/final_div_factor
    and warm = round(pct_start * total_steps) clamped to [1, total_steps-1],

        step <= warm:  init  + (max_lr - init)  * (1 - cos(pi * step/warm)) / 2
        step >  warm:  floor + (max_lr - floor) * (1 + cos(pi * u)) / 2,
                       u = (step - warm) / (total_steps - 1 - warm)

    so lr(0) = init, lr(warm) = max_lr, lr(total_steps-1) = floor.
    """
    if not 0 <= step < total_steps:
        raise ConfigError(f"step {step} outside [0, {total_steps})")
    init = cfg.max_lr / cfg.div_factor
    floor = cfg.max_lr / cfg.final_div_factor
    if total_steps == 1:
        return init
    warm = min(max(round(cfg.pct_start * total_steps), 1), total_steps - 1)
    if step <= warm:
        return init + (cfg.max_lr - init) * (1.0 - math.cos(math.pi * step / warm)) / 2.0
    u = (step - warm) / (total_steps - 1 - warm)
    return floor + (cfg.max_lr - floor) * (1.0 + math.cos(math.pi * u)) / 2.0


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0


def init_adam(params: dict) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(params: dict, grads: dict, state: AdamState, lr: float, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place and deterministic."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainError(f"non-finite gradient for parameter '{name}'")
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name in params:
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        mhat = state.m[name] / c1
        vhat = state.v[name] / c2
        params[name] -= lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)
        if not np.all(np.isfinite(params[name])):
            raise TrainError(f"parameter '{name}' became non-finite after the update")


@dataclass
class HistoryRow:
    epoch: int
    train_mse: float
    val_mse: float
    lr: float


@dataclass
class History:
    rows: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_mse: float = math.inf


def write_history(history: History, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_mse,val_mse,lr\n")
        for r in history.rows:
            fh.write(f"{r.epoch},{r.train_mse!r},{r.val_mse!r},{r.lr!r}\n")


def _flatten(batch: np.ndarray) -> np.ndarray:
    # (B, N, T) -> (B*N, T); row r belongs to channel r mod N
    b, n, t = batch.shape
    return batch.reshape(b * n, t)


def evaluate(model: SwiftModel, data: SplitData, part: str, metrics=("mse", "mae"), batch_size: int = 256) -> dict:
    """Average metrics over every sliding window of a split (pure)."""
    cfg = model.config
    starts = data.starts(part, cfg.lookback, cfg.horizon)
    if starts.size == 0:
        raise TrainError(f"split '{part}' has no windows")
    sq_sum, abs_sum, count = 0.0, 0.0, 0
    for ofs in range(0, starts.size, batch_size):
        bx, by = gather_windows(data.values, starts[ofs : ofs + batch_size], cfg.lookback, cfg.horizon)
        pred, _ = forward(_flatten(bx), model)
        diff = pred - _flatten(by)
        sq_sum += float(np.sum(diff * diff))
        abs_sum += float(np.sum(np.abs(diff)))
        count += diff.size
    out = {}
    if "mse" in metrics:
        out["mse"] = sq_sum / count
    if "mae" in metrics:
        out["mae"] = abs_sum / count
    return out


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, data: SplitData, freeze=frozenset()):
    """Mini-batch Adam with per-step one-cycle LR and validation selection.

    Returns (best_model, history): the parameters with minimal validation
    MSE and the per-epoch loss/lr record.  ``freeze`` names parameters
    whose gradients are zeroed (used by the component ablations).
    """
    if data.values.shape[0] != model_cfg.channels:
        raise ConfigError(
            f"model expects {model_cfg.channels} channels, data has {data.values.shape[0]}"
        )
    t, s = model_cfg.lookback, model_cfg.horizon
    train_starts = data.starts("train", t, s)
    steps_per_epoch = train_starts.size // train_cfg.batch_size
    if steps_per_epoch < 1:
        raise TrainError(
            f"{train_starts.size} train windows cannot fill one batch of {train_cfg.batch_size}"
        )
    unknown = set(freeze) - set(param_shapes(model_cfg))
    if unknown:
        raise ConfigError(f"cannot freeze unknown parameters: {sorted(unknown)}")

    model = init_model(model_cfg, train_cfg.seed)
    for name in freeze:
        model.params[name][...] = 0.0
    state = init_adam(model.params)
    shuffler = np.random.default_rng([train_cfg.seed, 1])
    total_steps = train_cfg.epochs * steps_per_epoch

    history = History()
    best_params: Optional[dict] = None
    stall = 0
    global_step = 0
    for epoch in range(train_cfg.epochs):
        perm = shuffler.permutation(train_starts.size)
        epoch_loss = 0.0
        lr = 0.0
        for step in range(steps_per_epoch):
            idx = perm[step * train_cfg.batch_size : (step + 1) * train_cfg.batch_size]
            bx, by = gather_windows(data.values, train_starts[idx], t, s)
            lr = onecycle_lr(global_step, total_steps, train_cfg)
            pred, cache = forward(_flatten(bx), model)
            loss, grad = mse_loss(pred, _flatten(by))
            if not math.isfinite(loss):
                raise TrainError(f"loss diverged at epoch {epoch} step {step}")
            grads = backward(cache, model, grad)
            for name in freeze:
                grads[name][...] = 0.0
            adam_step(model.params, grads, state, lr, train_cfg)
            epoch_loss += loss
            global_step += 1
        val = evaluate(model, data, "val", metrics=("mse",))["mse"]
        history.rows.append(HistoryRow(epoch, epoch_loss / steps_per_epoch, val, lr))
        if val < history.best_val_mse:
            history.best_val_mse = val
            history.best_epoch = epoch
            best_params = {k: p.copy() for k, p in model.params.items()}
            stall = 0
        else:
            stall += 1
            if stall >= train_cfg.patience:
                break
    model.params = best_params
    return model, history
