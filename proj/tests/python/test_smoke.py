import os
import sys

import numpy as np
import pytest

module_dir = os.environ.get("MEDFUSE_MODULE_DIR")
if module_dir:
    sys.path.insert(0, module_dir)

mf = pytest.importorskip("_medfuse")


def test_synth_is_deterministic():
    a = mf.synth_generate(stations=4, steps=600, seed=3)
    b = mf.synth_generate(stations=4, steps=600, seed=3)
    assert a.values.shape == (4, 600, 1)
    assert np.array_equal(a.values, b.values)
    assert len(a.timestamps) == 600


def test_pipeline_and_training_round_trip(tmp_path):
    raw = mf.synth_generate(stations=3, steps=800, seed=5)
    train_raw, valid_raw, test_raw = mf.split(raw, 0.7, 0.1, 0.2)
    stats = mf.fit_normalize(train_raw)
    train_samples = mf.window(mf.apply_normalize(train_raw, stats), 12, 6, 6)
    valid_samples = mf.window(mf.apply_normalize(valid_raw, stats), 12, 6, 6)
    test_samples = mf.window(mf.apply_normalize(test_raw, stats), 12, 6, 6)
    assert train_samples[0].x.shape == (3, 12, 1)
    assert train_samples[0].y.shape == (3, 6, 1)

    cfg = mf.ModelConfig()
    cfg.encoders = 3
    cfg.decoders = 3
    cfg.t_enc = 12
    cfg.t_dec = 6
    cfg.hidden = 8
    cfg.att_hidden = 4

    tcfg = mf.TrainConfig()
    tcfg.max_epochs = 5
    tcfg.patience = 5
    tcfg.seed = 7

    params, report = mf.train(train_samples, valid_samples, cfg, tcfg)
    assert len(report["train_losses"]) >= 1
    assert report["train_losses"][-1] < report["train_losses"][0]

    mse = mf.evaluate(params, cfg, test_samples)
    assert np.isfinite(mse) and mse > 0.0

    out = mf.forward(train_samples[0].x, params, cfg)
    assert out["y_hat"].shape == (3, 6, 1)
    np.testing.assert_allclose(out["weights"].sum(axis=1), 1.0, atol=1e-12)

    path = str(tmp_path / "model.ckpt")
    mf.save_checkpoint(path, cfg, params, seed=7)
    cfg_back, params_back = mf.load_checkpoint(path)
    assert params_back.checksum() == params.checksum()
    assert cfg_back.hidden == cfg.hidden


def test_masked_forward_zeroes_absent_encoders():
    cfg = mf.ModelConfig()
    cfg.encoders = 3
    cfg.decoders = 2
    cfg.t_enc = 4
    cfg.t_dec = 2
    cfg.hidden = 5
    cfg.att_hidden = 3
    params = mf.init_params(cfg, 11)
    x = np.random.default_rng(0).normal(size=(3, 4, 1))
    out = mf.forward(x, params, cfg, mask=[True, False, True])
    assert np.all(out["weights"][:, 1] == 0.0)
    np.testing.assert_allclose(out["weights"].sum(axis=1), 1.0, atol=1e-12)


def test_baselines():
    x = np.arange(24, dtype=float).reshape(2, 4, 3)
    y = mf.last_observed(x, 5)
    assert y.shape == (2, 5, 3)
    assert np.all(y[0, :, :] == x[0, -1, :])

    raw = mf.synth_generate(stations=3, steps=600, seed=9)
    stats = mf.fit_normalize(raw)
    samples = mf.window(mf.apply_normalize(raw, stats), 8, 4, 4)
    model = mf.ridge_fit(samples, joint=True)
    pred = mf.ridge_predict(model, samples[0].x)
    assert pred.shape == samples[0].y.shape
    assert np.isfinite(mf.ridge_evaluate(model, samples))
