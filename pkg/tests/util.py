"""Shared test helpers: independent brute-force oracles, the
finite-difference gradient harness, and dataset location."""

import os
from pathlib import Path

import numpy as np

import swift_forecast as sf


def oracle_dwt(x, h_lo, h_hi):
    """Direct periodic stride-2 correlation, plain Python loops."""
    n, t = x.shape
    half = t // 2
    approx = np.zeros((n, half))
    detail = np.zeros((n, half))
    for c in range(n):
        for k in range(half):
            sa = sd = 0.0
            for tap in range(len(h_lo)):
                v = x[c, (2 * k + tap) % t]
                sa += h_lo[tap] * v
                sd += h_hi[tap] * v
            approx[c, k] = sa
            detail[c, k] = sd
    return approx, detail


def oracle_conv_residual(approx, detail, w, b):
    """Naive zero-padded cross-band convolution plus residual."""
    bands = np.stack([approx, detail], axis=1)
    rows, _, length = bands.shape
    k = w.shape[2]
    pad = (k - 1) // 2
    out = np.zeros_like(bands)
    for r in range(rows):
        for o in range(2):
            for t in range(length):
                acc = b[o]
                for i in range(2):
                    for j in range(k):
                        src = t + j - pad
                        if 0 <= src < length:
                            acc += w[o, i, j] * bands[r, i, src]
                out[r, o, t] = acc + bands[r, o, t]
    return out[:, 0], out[:, 1]


def oracle_matmul(x, w, b):
    """Triple-loop GEMM."""
    rows, inner = x.shape
    out = np.zeros((rows, w.shape[1]))
    for r in range(rows):
        for s in range(w.shape[1]):
            acc = b[s]
            for l in range(inner):
                acc += x[r, l] * w[l, s]
            out[r, s] = acc
    return out


def fd_gradient_worst(cfg, seed=7, h=1e-5):
    """Worst relative error between analytic gradients and central finite
    differences of the MSE loss, over every learnable scalar."""
    rng = np.random.default_rng(seed)
    model = sf.init_model(cfg, seed)
    if "gamma" in model.params:
        # non-trivial affine so every gradient path is exercised
        model.params["gamma"] = 1.0 + 0.1 * rng.standard_normal(cfg.channels)
        model.params["beta"] = 0.05 * rng.standard_normal(cfg.channels)
    x = rng.standard_normal((cfg.channels, cfg.lookback))
    y = rng.standard_normal((cfg.channels, cfg.horizon))

    def loss_of():
        pred, _ = sf.forward(x, model)
        return sf.mse_loss(pred, y)[0]

    pred, cache = sf.forward(x, model)
    _, grad_out = sf.mse_loss(pred, y)
    grads = sf.backward(cache, model, grad_out)
    worst = 0.0
    for name, p in model.params.items():
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lp = loss_of()
            p[idx] = orig - h
            lm = loss_of()
            p[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            an = grads[name][idx]
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
            worst = max(worst, rel)
    return worst


def identity_model(lookback, channels=1, norm="mean"):
    """Zero conv + identity shared head: the forward pass is the identity
    whenever horizon == lookback."""
    cfg = sf.ModelConfig(
        lookback=lookback,
        horizon=lookback,
        kernel_size=3,
        head="linear",
        head_mode="share",
        norm=norm,
        channels=channels,
    )
    model = sf.init_model(cfg, seed=0)
    model.params["conv_w"][...] = 0.0
    model.params["conv_b"][...] = 0.0
    model.params["head_w"][...] = np.eye(lookback // 2)
    model.params["head_b"][...] = 0.0
    return model


def dataset_path(name):
    """Locate a benchmark CSV under $SWIFT_DATA_DIR or ./data, else None."""
    candidates = []
    env = os.environ.get("SWIFT_DATA_DIR")
    if env:
        candidates.append(Path(env) / name)
    candidates.append(Path(__file__).resolve().parent.parent / "data" / name)
    for cand in candidates:
        if cand.is_file():
            return cand
    return None
