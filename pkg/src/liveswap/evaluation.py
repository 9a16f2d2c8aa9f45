"""Inference-time scoring, PAD metrics, translation artifacts, feature export.

Scores: score_lbp = mean |estimated LBP map|, score_depth = mean |estimated
depth map|, fused = their average (or max in max-fusion mode). Higher score
means more live; a sample is accepted as live when score >= threshold.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from matplotlib import colormaps

from . import nets
from .dataio import ImageSample

SCORE_COLUMNS = ("source_id", "label", "score_lbp", "score_depth", "score_fused")
FUSION_MODES = ("mean", "max")
DELTA_COLORMAP = "viridis"

_SCORE_BATCH = 16


@dataclass
class ScoreRow:
    source_id: str
    label: str
    score_lbp: float
    score_depth: float
    score_fused: float


@dataclass
class EvalReport:
    rows: list[ScoreRow]
    threshold: float
    apcer: float
    bpcer: float
    acer: float
    hter: float


@dataclass
class FeatureTable:
    source_ids: list[str]
    labels: list[str]
    attack_types: list[str]
    features: np.ndarray  # N×K float32


def infer_scores(images: torch.Tensor, bundle: nets.ModelBundle,
                 fusion: str = "mean") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-image (score_lbp, score_depth, score_fused); no decoding involved."""
    if fusion not in FUSION_MODES:
        raise ValueError(f"fusion must be one of {FUSION_MODES}, got {fusion!r}")
    with torch.no_grad():
        z = bundle.encoder(images)
        lbp = bundle.lbp_net(z.liveness)[:, 0].abs().mean(dim=(1, 2)).numpy()
        depth = bundle.depth_net(images)[:, 0].abs().mean(dim=(1, 2)).numpy()
    fused = (lbp + depth) / 2.0 if fusion == "mean" else np.maximum(lbp, depth)
    return lbp, depth, fused


def score_samples(samples: Sequence[ImageSample], bundle: nets.ModelBundle,
                  fusion: str = "mean") -> list[ScoreRow]:
    nets.set_eval(bundle)
    rows: list[ScoreRow] = []
    for start in range(0, len(samples), _SCORE_BATCH):
        chunk = samples[start:start + _SCORE_BATCH]
        images = torch.from_numpy(
            np.ascontiguousarray(np.stack([s.image for s in chunk]).transpose(0, 3, 1, 2)))
        lbp, depth, fused = infer_scores(images, bundle, fusion)
        rows.extend(ScoreRow(s.source_id, s.label, float(l), float(d), float(f))
                    for s, l, d, f in zip(chunk, lbp, depth, fused))
    return rows


def select_threshold(scores, labels) -> float:
    """Equal-error-rate threshold on a dev split.

    Candidates are midpoints between consecutive distinct scores plus
    accept-all / reject-all sentinels; the candidate minimizing |FAR − FRR|
    wins, ties going to the lower threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if labels.all() or not labels.any():
        raise ValueError("threshold selection needs both classes")
    uniq = np.unique(scores)
    candidates = np.concatenate([[uniq[0] - 1.0], (uniq[:-1] + uniq[1:]) / 2.0,
                                 [uniq[-1] + 1.0]])
    best_thr, best_gap = None, None
    for thr in candidates:
        far = float(np.mean(scores[~labels] >= thr))
        frr = float(np.mean(scores[labels] < thr))
        gap = abs(far - frr)
        if best_gap is None or gap < best_gap:
            best_thr, best_gap = float(thr), gap
    return best_thr


def compute_metrics(scores, labels, threshold: float) -> dict[str, float]:
    """APCER/BPCER/ACER/HTER in percent; labels: 1 = live, 0 = spoof."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_live = int(labels.sum())
    n_spoof = int((~labels).sum())
    if n_live == 0 or n_spoof == 0:
        raise ValueError(f"metrics undefined with {n_live} live / {n_spoof} spoof")
    apcer = 100.0 * float(np.sum(scores[~labels] >= threshold)) / n_spoof
    bpcer = 100.0 * float(np.sum(scores[labels] < threshold)) / n_live
    far = 100.0 * float(np.sum(scores[~labels] >= threshold)) / n_spoof
    frr = 100.0 * float(np.sum(scores[labels] < threshold)) / n_live
    return {"apcer": apcer, "bpcer": bpcer, "acer": (apcer + bpcer) / 2.0,
            "hter": (far + frr) / 2.0}


def build_report(rows: Sequence[ScoreRow], threshold: float) -> EvalReport:
    scores = [r.score_fused for r in rows]
    labels = [1 if r.label == "live" else 0 for r in rows]
    m = compute_metrics(scores, labels, threshold)
    return EvalReport(rows=list(rows), threshold=float(threshold), **m)


def report_dict(report: EvalReport) -> dict:
    labels = [r.label for r in report.rows]
    return {
        "threshold": report.threshold,
        "apcer": report.apcer, "bpcer": report.bpcer,
        "acer": report.acer, "hter": report.hter,
        "n_live": labels.count("live"), "n_spoof": labels.count("spoof"),
    }


def write_scores_csv(path: Path, rows: Sequence[ScoreRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_COLUMNS)
        for r in rows:
            writer.writerow([r.source_id, r.label, repr(r.score_lbp),
                             repr(r.score_depth), repr(r.score_fused)])


def translate_pair(image_a: np.ndarray, image_b: np.ndarray,
                   bundle: nets.ModelBundle) -> dict[str, dict[str, np.ndarray]]:
    """Reconstructions and liveness swaps of a (live A, spoof B) pair.

    Returns {"A_rec","B_rec","A_b","B_a"} → {"image": H×W×3, "lbp": m×m,
    "depth": m×m}; the maps are each decoded image's own estimates.
    """
    nets.set_eval(bundle)
    with torch.no_grad():
        batch = torch.from_numpy(
            np.ascontiguousarray(np.stack([image_a, image_b]).transpose(0, 3, 1, 2)))
        z = bundle.encoder(batch)
        c_a, c_b = z.content[:1], z.content[1:]
        l_a, l_b = z.liveness[:1], z.liveness[1:]
        s_a = tuple(s[:1] for s in z.shortcuts)
        s_b = tuple(s[1:] for s in z.shortcuts)
        decoded = {
            "A_rec": bundle.decoder(c_a, l_a, s_a),
            "B_rec": bundle.decoder(c_b, l_b, s_b),
            "A_b": bundle.decoder(c_a, l_b, s_a),
            "B_a": bundle.decoder(c_b, l_a, s_b),
        }
        out: dict[str, dict[str, np.ndarray]] = {}
        for name, img in decoded.items():
            z_dec = bundle.encoder(img)
            out[name] = {
                "image": img[0].permute(1, 2, 0).numpy(),
                "lbp": bundle.lbp_net(z_dec.liveness)[0, 0].numpy(),
                "depth": bundle.depth_net(img)[0, 0].numpy(),
            }
    return out


def delta_values(original: np.ndarray, translated: np.ndarray) -> np.ndarray:
    """|original − translated| averaged over channels, scaled to [0,1]."""
    if original.shape != translated.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {translated.shape}")
    delta = np.abs(original.astype(np.float64) - translated.astype(np.float64)).mean(axis=2)
    peak = delta.max()
    return (delta / peak if peak > 0 else delta).astype(np.float32)


def delta_map(original: np.ndarray, translated: np.ndarray) -> np.ndarray:
    """Color-mapped delta image (uint8 RGB, fixed colormap)."""
    values = delta_values(original, translated)
    rgba = colormaps[DELTA_COLORMAP](values)
    return np.round(rgba[..., :3] * 255.0).astype(np.uint8)


def export_features(samples: Sequence[ImageSample], bundle: nets.ModelBundle,
                    path: Path, include_content: bool = False) -> None:
    """Write flattened liveness (optionally content) features to CSV."""
    nets.set_eval(bundle)
    header: list[str] | None = None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for start in range(0, len(samples), _SCORE_BATCH):
            chunk = samples[start:start + _SCORE_BATCH]
            images = torch.from_numpy(
                np.ascontiguousarray(np.stack([s.image for s in chunk]).transpose(0, 3, 1, 2)))
            with torch.no_grad():
                z = bundle.encoder(images)
                feats = z.liveness.flatten(1)
                if include_content:
                    feats = torch.cat([feats, z.content.flatten(1)], dim=1)
            feats = feats.numpy()
            if header is None:
                n_l = z.liveness[0].numel()
                header = ["source_id", "label", "attack_type"]
                header += [f"l{i}" for i in range(n_l)]
                if include_content:
                    header += [f"c{i}" for i in range(feats.shape[1] - n_l)]
                writer.writerow(header)
            for s, row in zip(chunk, feats):
                writer.writerow([s.source_id, s.label, s.attack_type,
                                 *(repr(float(v)) for v in row)])


def read_features_csv(path: Path) -> FeatureTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != list(("source_id", "label", "attack_type")):
            raise ValueError(f"{path}: not a feature table")
        ids, labels, attacks, rows = [], [], [], []
        for row in reader:
            ids.append(row[0])
            labels.append(row[1])
            attacks.append(row[2])
            rows.append([float(v) for v in row[3:]])
    return FeatureTable(ids, labels, attacks, np.asarray(rows, dtype=np.float32))


def pca_2d(features: np.ndarray) -> np.ndarray:
    """Project rows onto the top-2 principal components (SVD-based)."""
    centered = features.astype(np.float64) - features.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return (centered @ vt[:2].T).astype(np.float32)
