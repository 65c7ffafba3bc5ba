import numpy as np
import pytest

import swift_forecast as sf
from swift_forecast.analysis import load_matrix_csv, standardized_fit_mse
from swift_forecast.errors import AnalysisError, ConfigError


def random_triple(seed=0, shape=(8, 4)):
    rng = np.random.default_rng(seed)
    return sf.WeightTriple(*rng.standard_normal((3,) + shape))


# -- cosine similarity ---------------------------------------------------------


def test_cosine_self_and_negation():
    a = np.random.default_rng(0).standard_normal((5, 3))
    assert sf.cosine_sim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert sf.cosine_sim(a, -a) == pytest.approx(-1.0, abs=1e-12)


def test_cosine_orthogonal():
    assert sf.cosine_sim(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_zero_norm_rejected():
    with pytest.raises(AnalysisError):
        sf.cosine_sim(np.zeros(4), np.ones(4))


def test_cosine_scale_invariance():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 10))
    base = sf.cosine_sim(a, b)
    assert abs(sf.cosine_sim(3.7 * a, b) - base) < 1e-12
    assert abs(sf.cosine_sim(-2.0 * a, b) + base) < 1e-12


# -- least squares ---------------------------------------------------------------


def test_lr_decompose_recovers_exact_combination():
    rng = np.random.default_rng(2)
    w_l, w_h = rng.standard_normal((2, 12, 6))
    w_s = 0.8 * w_l + 0.05 * w_h + 0.001
    beta_l, beta_h, intercept, fit_mse = sf.lr_decompose(sf.WeightTriple(w_s, w_l, w_h))
    assert beta_l == pytest.approx(0.8, abs=1e-12)
    assert beta_h == pytest.approx(0.05, abs=1e-12)
    assert intercept == pytest.approx(0.001, abs=1e-12)
    assert fit_mse < 1e-20


def test_lr_decompose_zero_regressor_is_singular():
    rng = np.random.default_rng(3)
    w_l = rng.standard_normal((6, 6))
    with pytest.raises(AnalysisError):
        sf.lr_decompose(sf.WeightTriple(w_l.copy(), w_l, np.zeros((6, 6))))


def test_lr_decompose_matches_pinv_oracle():
    triple = random_triple(seed=4, shape=(10, 7))
    beta_l, beta_h, intercept, _ = sf.lr_decompose(triple)
    a = np.column_stack(
        [triple.w_l.ravel(), triple.w_h.ravel(), np.ones(triple.w_s.size)]
    )
    oracle = np.linalg.pinv(a) @ triple.w_s.ravel()
    assert abs(beta_l - oracle[0]) < 1e-9
    assert abs(beta_h - oracle[1]) < 1e-9
    assert abs(intercept - oracle[2]) < 1e-9


def test_lr_residual_orthogonal_to_regressors():
    triple = random_triple(seed=5)
    beta_l, beta_h, intercept, _ = sf.lr_decompose(triple)
    resid = triple.w_s.ravel() - (
        beta_l * triple.w_l.ravel() + beta_h * triple.w_h.ravel() + intercept
    )
    assert abs(resid @ triple.w_l.ravel()) < 1e-9
    assert abs(resid @ triple.w_h.ravel()) < 1e-9
    assert abs(resid.sum()) < 1e-9


def test_standardized_fit_is_scale_free():
    triple = random_triple(seed=6)
    scaled = sf.WeightTriple(5.0 * triple.w_s, triple.w_l.copy(), triple.w_h.copy())
    assert standardized_fit_mse(triple) == pytest.approx(standardized_fit_mse(scaled), rel=1e-9)


# -- heatmaps ---------------------------------------------------------------------


def test_heatmap_pixels(tmp_path):
    path = tmp_path / "hm.pgm"
    sf.export_heatmap(np.array([[0.0, 1.0], [1.0, 0.0]]), path)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n2 2\n255\n")
    assert list(blob[-4:]) == [0, 255, 255, 0]


def test_heatmap_constant_matrix_is_midgray(tmp_path):
    path = tmp_path / "flat.pgm"
    sf.export_heatmap(np.full((3, 2), 4.2), path)
    assert list(path.read_bytes()[-6:]) == [128] * 6


def test_heatmap_bytes_are_stable(tmp_path):
    m = np.random.default_rng(7).standard_normal((5, 4))
    sf.export_heatmap(m, tmp_path / "a.pgm")
    sf.export_heatmap(m, tmp_path / "b.pgm")
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_heatmap_csv_round_trip(tmp_path):
    m = np.random.default_rng(8).standard_normal((6, 3))
    sf.export_heatmap(m, tmp_path / "m.pgm")
    assert np.array_equal(load_matrix_csv(tmp_path / "m.csv"), m)


# -- pair analysis ------------------------------------------------------------------


def linear_models(seed=0, lookback=16, horizon=8):
    share = sf.init_model(
        sf.ModelConfig(lookback, horizon, 3, head_mode="share", channels=2), seed
    )
    split = sf.init_model(
        sf.ModelConfig(lookback, horizon, 3, head_mode="split", channels=2), seed + 1
    )
    return share, split


def test_analyze_pair_reports_all_similarities(tmp_path):
    share, split = linear_models()
    report = sf.analyze_pair(share, split, tmp_path / "out")
    for key in ("sim_sl", "sim_sh", "sim_lh", "beta_l", "beta_h", "intercept",
                "fit_mse", "fit_mse_standardized"):
        assert key in report
    assert (tmp_path / "out" / "report.csv").exists()
    for name in ("w_s", "w_l", "w_h"):
        assert (tmp_path / "out" / f"{name}.pgm").exists()
        assert (tmp_path / "out" / f"{name}.csv").exists()


def test_analyze_pair_is_pure():
    share, split = linear_models(seed=3)
    assert sf.analyze_pair(share, split) == sf.analyze_pair(share, split)


def test_analyze_pair_same_share_model_twice():
    share, _ = linear_models(seed=5)
    report = sf.analyze_pair(share, share)
    assert report["degenerate_detail"] is True
    assert report["sim_sl"] == pytest.approx(1.0, abs=1e-12)
    assert report["beta_l"] == pytest.approx(1.0, abs=1e-9)
    assert report["beta_h"] == 0.0


def test_analyze_pair_horizon_mismatch():
    share, _ = linear_models(horizon=8)
    _, split = linear_models(horizon=16)
    with pytest.raises(ConfigError):
        sf.analyze_pair(share, split)


def test_analyze_pair_rejects_mlp_heads():
    share, split = linear_models()
    mlp = sf.init_model(sf.ModelConfig(16, 8, 3, head="mlp", channels=2), 0)
    with pytest.raises(ConfigError):
        sf.analyze_pair(mlp, split)


def test_analyze_pair_on_trained_toy_models():
    # end-to-end mechanics of the share-vs-split comparison on synthetic data
    raw = sf.synth_nonstationary(1500, seed=31, params=sf.SynthParams(channels=2))
    spec = sf.split(raw, "ratio")
    scaled, _ = sf.standardize(raw, spec.train)
    data = sf.SplitData(values=scaled.values, spec=spec)
    tc = sf.TrainConfig(epochs=3, batch_size=32, seed=2023)
    share, _ = sf.train(sf.ModelConfig(48, 16, 3, head_mode="share", channels=2), tc, data)
    split, _ = sf.train(sf.ModelConfig(48, 16, 3, head_mode="split", channels=2), tc, data)
    report = sf.analyze_pair(share, split)
    assert -1.0 <= report["sim_sl"] <= 1.0
    assert report["fit_mse"] >= 0.0
    assert not report["degenerate_detail"]
