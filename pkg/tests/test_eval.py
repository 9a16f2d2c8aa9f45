import json

import numpy as np
import pytest
import torch

from liveswap import evaluation, nets
from oracles import naive_pad_metrics
from test_trainer import TINY, synth_samples


def test_compute_metrics_trivial_cases():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [1, 1, 0, 0]
    m = evaluation.compute_metrics(scores, labels, 0.5)
    assert m["apcer"] == 0.0 and m["bpcer"] == 0.0 and m["acer"] == 0.0

    m = evaluation.compute_metrics([0.9, 0.4, 0.6, 0.2], [1, 1, 0, 0], 0.5)
    assert m["apcer"] == 50.0 and m["bpcer"] == 50.0 and m["acer"] == 50.0


def test_compute_metrics_matches_counting_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(4, 40))
        scores = rng.random(n)
        labels = rng.integers(0, 2, size=n)
        if labels.sum() in (0, n):
            labels[0], labels[-1] = 0, 1
        thr = float(rng.random())
        got = evaluation.compute_metrics(scores, labels, thr)
        apcer, bpcer, acer, hter = naive_pad_metrics(scores, labels, thr)
        assert got["apcer"] == apcer and got["bpcer"] == bpcer
        assert got["acer"] == acer and got["hter"] == hter
        assert got["acer"] == (got["apcer"] + got["bpcer"]) / 2


def test_compute_metrics_monotone_transform_invariance():
    rng = np.random.default_rng(1)
    scores = rng.random(30)
    labels = rng.integers(0, 2, size=30)
    labels[0], labels[1] = 0, 1
    thr = 0.4
    base = evaluation.compute_metrics(scores, labels, thr)
    fancy = evaluation.compute_metrics(np.exp(3 * scores), labels, np.exp(3 * thr))
    assert base == fancy


def test_compute_metrics_empty_class_rejected():
    with pytest.raises(ValueError):
        evaluation.compute_metrics([0.1, 0.2], [1, 1], 0.5)


def test_select_threshold_separable_gap_midpoint():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [1, 1, 0, 0]
    assert evaluation.select_threshold(scores, labels) == pytest.approx(0.5)


def test_select_threshold_two_samples_midpoint():
    assert evaluation.select_threshold([0.7, 0.3], [1, 0]) == pytest.approx(0.5)


def test_select_threshold_minimizes_far_frr_gap():
    rng = np.random.default_rng(2)
    live = rng.normal(0.6, 0.15, size=120)
    spoof = rng.normal(0.4, 0.15, size=120)
    scores = np.concatenate([live, spoof])
    labels = np.concatenate([np.ones(120), np.zeros(120)])
    thr = evaluation.select_threshold(scores, labels)
    m = evaluation.compute_metrics(scores, labels, thr)
    # FAR ~ FRR at the EER point, within one sample step (1/120 -> 0.84%)
    assert abs(m["apcer"] - m["bpcer"]) <= 100.0 / 120 + 1e-9

    # brute-force oracle over every candidate threshold
    uniq = np.unique(scores)
    cands = np.concatenate([[uniq[0] - 1], (uniq[:-1] + uniq[1:]) / 2, [uniq[-1] + 1]])
    gaps = [abs(evaluation.compute_metrics(scores, labels, c)["apcer"]
                - evaluation.compute_metrics(scores, labels, c)["bpcer"]) for c in cands]
    best = min(gaps)
    got_gap = abs(m["apcer"] - m["bpcer"])
    assert got_gap == pytest.approx(best)
    # ties broken toward the lower threshold
    assert thr == pytest.approx(min(c for c, g in zip(cands, gaps) if g == pytest.approx(best)))


def test_infer_scores_fusion_arithmetic():
    bundle = nets.build_models(TINY, seed=0)
    nets.set_eval(bundle)
    images = torch.rand(3, 3, 16, 16)
    lbp, depth, fused = evaluation.infer_scores(images, bundle)
    with torch.no_grad():
        z = bundle.encoder(images)
        want_lbp = bundle.lbp_net(z.liveness)[:, 0].abs().mean(dim=(1, 2)).numpy()
        want_depth = bundle.depth_net(images)[:, 0].abs().mean(dim=(1, 2)).numpy()
    assert np.allclose(lbp, want_lbp) and np.allclose(depth, want_depth)
    assert np.allclose(fused, (lbp + depth) / 2)

    _, _, fused_max = evaluation.infer_scores(images, bundle, fusion="max")
    assert np.allclose(fused_max, np.maximum(lbp, depth))
    with pytest.raises(ValueError):
        evaluation.infer_scores(images, bundle, fusion="median")


def test_score_samples_rows_and_csv(tmp_path):
    samples = synth_samples(3, 3, seed=4)
    bundle = nets.build_models(TINY, seed=0)
    rows = evaluation.score_samples(samples, bundle)
    assert len(rows) == 6
    assert all(np.isfinite(r.score_fused) for r in rows)
    path = tmp_path / "scores.csv"
    evaluation.write_scores_csv(path, rows)
    text = path.read_text().splitlines()
    assert text[0] == "source_id,label,score_lbp,score_depth,score_fused"
    assert len(text) == 7


def test_build_report_and_json(tmp_path):
    samples = synth_samples(4, 4, seed=5)
    bundle = nets.build_models(TINY, seed=0)
    rows = evaluation.score_samples(samples, bundle)
    thr = evaluation.select_threshold([r.score_fused for r in rows],
                                      [1 if r.label == "live" else 0 for r in rows])
    report = evaluation.build_report(rows, thr)
    assert report.acer == (report.apcer + report.bpcer) / 2
    for v in (report.apcer, report.bpcer, report.acer, report.hter):
        assert 0.0 <= v <= 100.0
    path = tmp_path / "report.json"
    path.write_text(json.dumps(evaluation.report_dict(report)))
    loaded = json.loads(path.read_text())
    assert set(loaded) >= {"threshold", "apcer", "bpcer", "acer", "hter"}


def test_translate_pair_outputs():
    samples = synth_samples(1, 1, seed=6)
    bundle = nets.build_models(TINY, seed=0)
    live = next(s for s in samples if s.label == "live")
    spoof = next(s for s in samples if s.label == "spoof")
    out = evaluation.translate_pair(live.image, spoof.image, bundle)
    assert set(out) == {"A_rec", "B_rec", "A_b", "B_a"}
    for item in out.values():
        assert item["image"].shape == (16, 16, 3)
        assert item["image"].min() >= 0.0 and item["image"].max() <= 1.0
        assert item["lbp"].shape == (2, 2) and item["depth"].shape == (2, 2)


def test_delta_map_zero_and_rendering():
    a = np.random.default_rng(7).random((8, 8, 3)).astype(np.float32)
    values = evaluation.delta_values(a, a)
    assert values.shape == (8, 8) and np.all(values == 0)
    rgb = evaluation.delta_map(a, a)
    assert rgb.shape == (8, 8, 3) and rgb.dtype == np.uint8
    assert len(np.unique(rgb.reshape(-1, 3), axis=0)) == 1

    b = np.clip(a + 0.3, 0, 1)
    values = evaluation.delta_values(a, b)
    assert values.max() <= 1.0 and values.max() == 1.0  # normalized to full range


def test_export_features_and_pca(tmp_path):
    samples = synth_samples(4, 4, seed=8)
    bundle = nets.build_models(TINY, seed=0)
    path = tmp_path / "features.csv"
    evaluation.export_features(samples, bundle, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 9
    header = lines[0].split(",")
    assert header[:3] == ["source_id", "label", "attack_type"]
    n_feat = TINY.liveness_channels * 2 * 2
    assert len(header) == 3 + n_feat

    table = evaluation.read_features_csv(path)
    assert table.features.shape == (8, n_feat)
    xy = evaluation.pca_2d(table.features)
    assert xy.shape == (8, 2)
    assert np.isfinite(xy).all()
