import math
import os

import numpy as np
import pytest

import cada

TINY_CONFIG = """
synth.size = 16
net.depth = 2
net.base_channels = 4
data.n_source_labeled = 3
data.n_target_labeled = 2
data.n_target_unlabeled = 2
data.n_val = 2
data.n_test = 2
train.epochs = 1
train.batch_size = 2
train.n_source = 1
train.n_target = 1
train.n_unlabeled = 0
"""


def test_config_round_trip_and_hash():
    cfg = cada.Config.from_text(TINY_CONFIG)
    again = cada.Config.from_text(cfg.text())
    assert again.text() == cfg.text()
    assert again.hash_hex() == cfg.hash_hex()
    assert len(cfg.hash_hex()) == 16

    cfg.set("train.lr0", "0.002")
    assert cfg.hash_hex() != again.hash_hex()
    assert ("train.lr0", "0.002") in cfg.items()

    with pytest.raises(ValueError):
        cfg.set("no.such.key", "1")
    with pytest.raises(ValueError):
        cada.Config.from_text("train.epochs = soon")


def test_lambda_rampup_endpoints():
    assert cada.lambda_rampup(0) == pytest.approx(0.1 * math.exp(-5.0), abs=1e-15)
    assert cada.lambda_rampup(50) == pytest.approx(0.1, abs=1e-15)
    values = [cada.lambda_rampup(t) for t in range(51)]
    assert values == sorted(values)


def test_losses_and_metrics_against_numpy():
    rng = np.random.default_rng(7)
    p = rng.uniform(0.1, 0.9, size=(2, 1, 8, 8))
    y = (rng.uniform(size=(2, 1, 8, 8)) < 0.5).astype(float)

    want_bce = float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))
    assert cada.binary_cross_entropy(p, y) == pytest.approx(want_bce, rel=1e-12)

    inter = (p * y).sum(axis=(1, 2, 3))
    sums = p.sum(axis=(1, 2, 3)) + y.sum(axis=(1, 2, 3))
    want_dice_loss = float(np.mean(1.0 - (2.0 * inter + 1.0) / (sums + 1.0)))
    assert cada.soft_dice_loss(p, y, 1.0) == pytest.approx(want_dice_loss, rel=1e-12)

    pred = (rng.uniform(size=(16, 16)) < 0.4).astype(float)
    gt = (rng.uniform(size=(16, 16)) < 0.4).astype(float)
    m = cada.metrics(pred, gt)
    tp = float(((pred == 1) & (gt == 1)).sum())
    fp = float(((pred == 1) & (gt == 0)).sum())
    fn = float(((pred == 0) & (gt == 1)).sum())
    assert m["recall"] == pytest.approx(tp / (tp + fn), abs=1e-15)
    assert m["precision"] == pytest.approx(tp / (tp + fp), abs=1e-15)
    assert m["dice"] == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-15)


def test_clahe_constant_image_is_unchanged():
    img = np.full((1, 16, 16), 0.5)
    out = cada.clahe(img, tiles=1, clip_limit=2.0)
    assert out.shape == (1, 16, 16)
    assert np.array_equal(out, img)

    bright = cada.gamma_correct(np.full((1, 4, 4), 0.25), 0.5)
    assert bright == pytest.approx(np.full((1, 4, 4), 0.5), abs=1e-15)


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    img = rng.uniform(size=(1, 9, 7))
    path = str(tmp_path / "img.pgm")
    cada.save_pgm(path, img)
    back = cada.load_image(path)
    assert back.shape == (1, 9, 7)
    assert np.max(np.abs(back - img)) <= 1.0 / 510.0 + 1e-12


def test_generate_train_predict_evaluate(tmp_path):
    cfg = cada.Config.from_text(TINY_CONFIG)
    data = str(tmp_path / "data")
    run = str(tmp_path / "run")

    cada.generate_dataset(cfg, data)
    assert os.path.exists(os.path.join(data, "manifest.tsv"))

    res = cada.train(cfg, data, run, regime="L-SUP")
    assert os.path.exists(res["best_checkpoint"])
    assert os.path.exists(res["log_path"])
    assert res["teacher_val_dice"] is None
    assert 0.0 <= res["best_val_dice"] <= 1.0

    img = cada.load_image(os.path.join(data, "test", "test_0000.pgm"))
    prob = cada.predict(res["best_checkpoint"], img, domain="TARGET")
    assert prob.shape == (16, 16)
    assert np.all((prob > 0.0) & (prob < 1.0))

    report = cada.evaluate(res["best_checkpoint"], data, "test",
                           csv_path=str(tmp_path / "report.csv"))
    assert len(report["ids"]) == 2
    assert 0.0 <= report["mean"]["dice"] <= 1.0
    assert os.path.exists(tmp_path / "report.csv")

    with pytest.raises(RuntimeError):
        cada.evaluate(res["best_checkpoint"], data, "target_unlabeled")
    with pytest.raises(RuntimeError):
        cada.evaluate(str(tmp_path / "missing.ckpt"), data, "test")
