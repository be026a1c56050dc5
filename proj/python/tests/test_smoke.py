# Copyright 2026 The STDN Desk Authors
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

import stdn


def test_loss_totals():
    assert stdn.total_generator_loss(6.0, 0.5, 3.0) == pytest.approx(56.003, abs=1e-12)
    assert stdn.total_supervision_loss(0.1, 0.2) == pytest.approx(5.2, abs=1e-12)
    assert stdn.esr_loss(np.full((1, 4, 4, 1), 0.5), ["spoof"]) == pytest.approx(0.5)


def test_compose_and_reconstruct():
    live = stdn.gen_live(3, 32)
    img = live["image"]
    assert img.shape == (1, 32, 32, 3)
    assert live["landmarks"].shape == (140, 2)
    elems = {
        "s": np.full((1, 1, 1, 3), 0.1),
        "b": np.full((1, 1, 1, 3), -0.05),
        "C": np.zeros((1, 8, 8, 3)),
        "T": np.zeros((1, 32, 32, 3)),
    }
    trace = stdn.compose(elems, img)
    np.testing.assert_allclose(trace, 0.1 * img - 0.05, atol=1e-12)
    np.testing.assert_allclose(stdn.reconstruct_live(img, elems) + trace, img, atol=1e-14)
    with pytest.raises(stdn.DimensionError):
        stdn.compose(elems, np.zeros((1, 16, 16, 3)))


def test_warp_identity_and_dense_field():
    lm = stdn.gen_live(5, 32)["landmarks"]
    trace = np.random.default_rng(0).uniform(-1, 1, (1, 32, 32, 3))
    np.testing.assert_array_equal(stdn.warp_trace(trace, lm, lm), trace)
    field = stdn.sparse_to_dense(lm, np.ones_like(lm), 32)
    assert field.shape == (32, 32, 2)
    assert np.allclose(field[field != 0], 1.0)


def test_score_and_roc():
    assert stdn.score(np.ones((8, 8)), np.zeros((32, 32, 3)), 1.0) == 0.5
    r = stdn.roc_metrics(["live"] * 3 + ["spoof"] * 3, [0.1, 0.2, 0.3, 0.6, 0.7, 0.8])
    assert r["eer"] == 0.0 and r["tdr_at_fdr"] == 1.0
    assert r["acer"] == (r["apcer"] + r["bpcer"]) / 2
    with pytest.raises(stdn.DomainError):
        stdn.roc_metrics(["live", "live"], [0.1, 0.2])


def test_dataset_and_short_training(tmp_path):
    d = stdn.gen_dataset(n_live=4, n_spoof=4, seed=1, size=32, test_fraction=0.0)
    assert len(d["train"]) == 8 and d["test"] == []
    spoof = next(s for s in d["train"] if s["label"] == "spoof")
    assert spoof["medium"] in {"colorshift", "moire", "maskedge"}
    cfg = "image_size = 32\nbatch_size = 4\nencoder_widths = 6,8,10\ndecoder_widths = 6,4,4\ndisc_widths = 4,6,8\n"
    t = stdn.Trainer(cfg)
    log = t.train(d["train"], 2)
    assert [s["iter"] for s in log] == [0, 1]
    assert all(s["disc_lr"] == s["gen_lr"] / 2 for s in log)
    out = t.infer(spoof["image"])
    assert out["trace"].shape == (1, 32, 32, 3)
    assert out["spoof_map"].shape == (1, 2, 2, 1)
    path = str(tmp_path / "t.ckpt")
    t.save(path)
    again = stdn.Trainer.load(path, cfg)
    assert again.iteration == 2
    np.testing.assert_array_equal(again.infer(spoof["image"])["trace"], out["trace"])


def test_cli_usage():
    code, _, err = stdn.run_cli(["nonsense"])
    assert code == 2 and err
