import math

import numpy as np
import pytest

import swift_forecast as sf
from swift_forecast.errors import ConfigError, ShapeError, TrainError
from swift_forecast.training import HistoryRow, init_adam

from util import identity_model


def make_split_data(length=1200, channels=2, seed=42, **synth_kw):
    raw = sf.synth_nonstationary(length, seed, sf.SynthParams(channels=channels, **synth_kw))
    spec = sf.split(raw, "ratio")
    scaled, _ = sf.standardize(raw, spec.train)
    return sf.SplitData(values=scaled.values, spec=spec)


# -- loss ----------------------------------------------------------------------


def test_mse_perfect_prediction():
    loss, grad = sf.mse_loss(np.ones((2, 3)), np.ones((2, 3)))
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_mse_hand_example():
    loss, grad = sf.mse_loss(np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]]))
    assert loss == 2.5
    assert np.allclose(grad, [[1.0, 2.0]])


def test_mse_permutation_invariant():
    rng = np.random.default_rng(0)
    pred, target = rng.standard_normal((2, 4, 6))
    perm = np.array([2, 0, 3, 1])
    assert sf.mse_loss(pred, target)[0] == sf.mse_loss(pred[perm], target[perm])[0]


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        sf.mse_loss(np.zeros((2, 3)), np.zeros((3, 2)))


# -- schedule -------------------------------------------------------------------


def test_onecycle_endpoints_and_peak():
    cfg = sf.TrainConfig()
    total = 1000
    assert sf.onecycle_lr(0, total, cfg) == cfg.max_lr / cfg.div_factor
    peak = round(cfg.pct_start * total)
    assert abs(sf.onecycle_lr(peak, total, cfg) - cfg.max_lr) < 1e-12
    assert abs(sf.onecycle_lr(total - 1, total, cfg) - cfg.max_lr / cfg.final_div_factor) < 1e-9


def test_onecycle_up_then_down():
    cfg = sf.TrainConfig()
    total = 200
    lrs = [sf.onecycle_lr(s, total, cfg) for s in range(total)]
    peak = int(np.argmax(lrs))
    assert abs(lrs[peak] - cfg.max_lr) < 1e-12
    assert all(b >= a for a, b in zip(lrs[: peak + 1], lrs[1 : peak + 1]))
    assert all(b <= a for a, b in zip(lrs[peak:], lrs[peak + 1 :]))
    # piecewise continuity
    jumps = np.abs(np.diff(lrs))
    assert np.max(jumps) < cfg.max_lr * 0.1


def test_onecycle_out_of_range():
    with pytest.raises(ConfigError):
        sf.onecycle_lr(10, 10, sf.TrainConfig())


# -- adam ------------------------------------------------------------------------


def test_adam_zero_gradient_is_noop():
    params = {"w": np.array([1.0, -2.0])}
    state = init_adam(params)
    sf.adam_step(params, {"w": np.zeros(2)}, state, lr=0.1, cfg=sf.TrainConfig())
    assert np.array_equal(params["w"], [1.0, -2.0])


def test_adam_unit_first_step():
    params = {"w": np.array([0.5])}
    state = init_adam(params)
    sf.adam_step(params, {"w": np.array([1.0])}, state, lr=0.1, cfg=sf.TrainConfig())
    # bias correction makes the first step ~ lr regardless of magnitude
    assert abs(params["w"][0] - 0.4) < 1e-8


def scalar_adam(grads, lr, b1=0.9, b2=0.999, eps=1e-8, theta=0.0):
    """Independent textbook recurrence on one scalar."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        theta -= lr * mhat / (math.sqrt(vhat) + eps)
    return theta


def test_adam_matches_scalar_oracle():
    params = {"w": np.array([0.0])}
    state = init_adam(params)
    cfg = sf.TrainConfig()
    gs = [0.3, -1.2]
    for g in gs:
        sf.adam_step(params, {"w": np.array([g])}, state, lr=0.05, cfg=cfg)
    assert abs(params["w"][0] - scalar_adam(gs, 0.05)) < 1e-12


def test_adam_rejects_non_finite_gradients():
    params = {"w": np.array([0.0])}
    state = init_adam(params)
    with pytest.raises(TrainError):
        sf.adam_step(params, {"w": np.array([np.nan])}, state, lr=0.1, cfg=sf.TrainConfig())
    assert state.t == 0  # step aborted before any mutation


# -- training loop ----------------------------------------------------------------


def small_train_cfg(**kw):
    base = dict(epochs=3, batch_size=16, seed=2023)
    base.update(kw)
    return sf.TrainConfig(**base)


def test_train_is_deterministic():
    data = make_split_data()
    cfg = sf.ModelConfig(32, 8, 3, channels=2)
    a_model, a_hist = sf.train(cfg, small_train_cfg(), data)
    b_model, b_hist = sf.train(cfg, small_train_cfg(), data)
    assert [(r.train_mse, r.val_mse, r.lr) for r in a_hist.rows] == [
        (r.train_mse, r.val_mse, r.lr) for r in b_hist.rows
    ]
    for name in a_model.params:
        assert a_model.params[name].tobytes() == b_model.params[name].tobytes()


def test_train_descends_on_linear_trend():
    t = np.arange(600, dtype=np.float64)
    raw = sf.RawSeries(values=np.stack([0.01 * t, -0.02 * t + 3.0]), channel_names=["a", "b"])
    spec = sf.split(raw, "ratio")
    scaled, _ = sf.standardize(raw, spec.train)
    data = sf.SplitData(values=scaled.values, spec=spec)
    cfg = sf.ModelConfig(32, 8, 3, channels=2)
    _, hist = sf.train(cfg, small_train_cfg(epochs=5), data)
    assert hist.rows[-1].train_mse < hist.rows[0].train_mse


def test_best_model_attains_min_val_mse():
    data = make_split_data()
    cfg = sf.ModelConfig(32, 8, 3, channels=2)
    model, hist = sf.train(cfg, small_train_cfg(epochs=4), data)
    val = sf.evaluate(model, data, "val")["mse"]
    assert val == hist.best_val_mse
    assert hist.best_val_mse == min(r.val_mse for r in hist.rows)


def test_train_rejects_oversized_batch():
    data = make_split_data(length=300)
    cfg = sf.ModelConfig(32, 8, 3, channels=2)
    with pytest.raises(TrainError):
        sf.train(cfg, small_train_cfg(batch_size=100_000), data)


def test_train_channel_mismatch():
    data = make_split_data(channels=2)
    with pytest.raises(ConfigError):
        sf.train(sf.ModelConfig(32, 8, 3, channels=5), small_train_cfg(), data)


def test_freeze_keeps_parameters_zero():
    data = make_split_data()
    cfg = sf.ModelConfig(32, 8, 3, channels=2)
    model, _ = sf.train(cfg, small_train_cfg(), data, freeze={"conv_w", "conv_b"})
    assert np.all(model.params["conv_w"] == 0.0)
    assert np.all(model.params["conv_b"] == 0.0)


def test_history_file_round_trip(tmp_path):
    hist = sf.History(rows=[HistoryRow(0, 0.5, 0.25, 1e-3), HistoryRow(1, 0.4, 0.2, 2e-3)])
    path = tmp_path / "history.csv"
    sf.training.write_history(hist, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,train_mse,val_mse,lr"
    assert lines[1].split(",") == ["0", "0.5", "0.25", "0.001"]


# -- evaluation --------------------------------------------------------------------


def test_evaluate_perfect_predictor_on_constant_data():
    values = np.full((2, 400), 1.7)
    spec = sf.split(sf.RawSeries(values=values, channel_names=["a", "b"]), "ratio")
    data = sf.SplitData(values=values, spec=spec)
    model = identity_model(16, channels=2)
    metrics = sf.evaluate(model, data, "test")
    assert metrics["mse"] < 1e-20
    assert metrics["mae"] < 1e-10


def test_evaluate_zero_predictor_matches_statistics_oracle():
    data = make_split_data()
    cfg = sf.ModelConfig(32, 8, 3, channels=2, norm="none")
    model = sf.init_model(cfg, 0)
    for name in model.params:
        model.params[name][...] = 0.0
    metrics = sf.evaluate(model, data, "test")
    starts = data.starts("test", 32, 8)
    _, by = sf.gather_windows(data.values, starts, 32, 8)
    assert abs(metrics["mse"] - np.mean(by**2)) < 1e-12


def test_evaluate_is_pure():
    data = make_split_data()
    model = sf.init_model(sf.ModelConfig(32, 8, 3, channels=2), 1)
    assert sf.evaluate(model, data, "val") == sf.evaluate(model, data, "val")


def test_evaluate_empty_split():
    values = np.zeros((1, 30))
    spec = sf.SplitSpec("ratio", (0, 28), (28, 29), (29, 30))
    data = sf.SplitData(values=values, spec=spec)
    model = sf.init_model(sf.ModelConfig(8, 2, 3, channels=1), 0)
    with pytest.raises(sf.SwiftError):
        sf.evaluate(model, data, "test")
