"""Command-line entry point.

Subcommands: gen-data, pretrain-depth, train, eval, cross-eval, translate,
plot. Every command takes -c/--config (flat key=value file), prints the
resolved configuration header (re-feedable as a config file), and maps errors
to exit codes: 0 ok, 2 config, 3 I/O, 4 missing artifact, 5 numeric failure.
``LD_SEED`` overrides the config seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import config as cfgmod
from . import dataio, evaluation, nets, trainer
from .errors import DataError, MissingArtifactError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MISSING = 4
EXIT_NUMERIC = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liveswap",
        description="Face anti-spoofing via liveness/content feature disentanglement.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("-c", "--config", required=True, type=Path,
                       help="flat key=value config file")
        p.set_defaults(func=func)
        return p

    add("gen-data", cmd_gen_data, "generate the synthetic dataset")
    add("pretrain-depth", cmd_pretrain_depth, "pretrain the depth net and save it")

    p = add("train", cmd_train, "run the alternating adversarial training loop")
    p.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint's step counter")

    p = add("eval", cmd_eval, "score a split and report PAD metrics")
    p.add_argument("--checkpoint", type=Path, help="override config checkpoint path")
    p.add_argument("--split", choices=dataio.SPLITS, help="split to score")

    p = add("cross-eval", cmd_cross_eval,
            "score a foreign dataset with the source dev threshold (HTER mode)")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--target-root", type=Path, help="root of the foreign dataset")

    p = add("translate", cmd_translate, "emit liveness-swap panels and delta maps")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--image-a", type=Path, help="live image (default: first test live)")
    p.add_argument("--image-b", type=Path, help="spoof image (default: first test spoof)")

    p = add("plot", cmd_plot, "2-D feature scatter from an exported feature CSV")
    p.add_argument("--features", type=Path, help="feature CSV (default: eval output)")
    p.add_argument("--out", type=Path, help="output PNG path")
    return parser


def _load_config(args) -> cfgmod.RunConfig:
    seed_override = None
    if "LD_SEED" in os.environ:
        try:
            seed_override = int(os.environ["LD_SEED"])
        except ValueError as exc:
            raise ValueError(f"LD_SEED must be an integer, got {os.environ['LD_SEED']!r}") from exc
    rc = cfgmod.load(args.config, seed_override)
    cfgmod.validate(rc)
    print(f"# resolved config ({args.command})")
    print(cfgmod.to_text(rc), end="")
    return rc


def _load_split_samples(rc: cfgmod.RunConfig, split: str,
                        root: Path | None = None) -> list[dataio.ImageSample]:
    manifest = dataio.load_manifest(root or rc.data_root, split)
    return dataio.load_dataset(manifest, rc.resolution)


def _load_bundle(rc: cfgmod.RunConfig, override: Path | None) -> nets.ModelBundle:
    bundle, _ = nets.load_checkpoint(override or rc.checkpoint)
    if asdict(bundle.config) != asdict(cfgmod.net_config(rc)):
        raise ValueError("checkpoint was trained with a different network configuration "
                         "than the current config describes")
    return bundle


def cmd_gen_data(args) -> int:
    rc = _load_config(args)
    manifests = dataio.generate_synthetic_dataset(cfgmod.gen_config(rc))
    for split, manifest in manifests.items():
        print(f"gen-data: {split}: {len(manifest.entries)} images under {manifest.root_path}")
    return EXIT_OK


def cmd_pretrain_depth(args) -> int:
    rc = _load_config(args)
    samples = _load_split_samples(rc, "train")
    bundle = nets.build_models(cfgmod.net_config(rc), seed=rc.seed)
    trainer.pretrain_depth(samples, cfgmod.train_config(rc), bundle.config,
                           depth_net=bundle.depth_net)
    rc.depth_checkpoint.parent.mkdir(parents=True, exist_ok=True)
    nets.save_checkpoint(rc.depth_checkpoint, bundle, {}, step=0,
                         run_config=cfgmod.to_dict(rc))
    print(f"pretrain-depth: saved {rc.depth_checkpoint}")
    return EXIT_OK


def cmd_train(args) -> int:
    rc = _load_config(args)
    samples = _load_split_samples(rc, "train")
    depth_net = None
    if not args.resume and rc.depth_checkpoint.exists():
        depth_bundle, _ = nets.load_checkpoint(rc.depth_checkpoint)
        depth_net = depth_bundle.depth_net
        print(f"train: using pretrained depth net from {rc.depth_checkpoint}")
    rc.checkpoint.parent.mkdir(parents=True, exist_ok=True)
    rc.log_csv.parent.mkdir(parents=True, exist_ok=True)
    _, history = trainer.train(
        samples, cfgmod.train_config(rc), cfgmod.net_config(rc), depth_net=depth_net,
        log_path=rc.log_csv, checkpoint_path=rc.checkpoint, resume=args.resume,
        run_config=cfgmod.to_dict(rc))
    if history:
        print(f"train: finished at step {history[-1]['step']}, "
              f"total {history[-1]['total']:.4f}; checkpoint {rc.checkpoint}")
    else:
        print("train: nothing to do (step counter already at target)")
    return EXIT_OK


def _finite_or_raise(report: evaluation.EvalReport) -> None:
    values = [report.threshold, report.apcer, report.bpcer, report.acer, report.hter]
    if not all(np.isfinite(v) for v in values):
        raise NumericError(f"non-finite evaluation metrics: {values}")


def cmd_eval(args) -> int:
    rc = _load_config(args)
    split = args.split or rc.eval_split
    bundle = _load_bundle(rc, args.checkpoint)
    dev_rows = evaluation.score_samples(_load_split_samples(rc, rc.threshold_split),
                                        bundle, rc.fusion)
    threshold = evaluation.select_threshold(
        [r.score_fused for r in dev_rows], [r.label == "live" for r in dev_rows])
    eval_samples = _load_split_samples(rc, split)
    rows = evaluation.score_samples(eval_samples, bundle, rc.fusion)
    report = evaluation.build_report(rows, threshold)
    _finite_or_raise(report)

    rc.out_dir.mkdir(parents=True, exist_ok=True)
    scores_path = rc.out_dir / f"scores_{split}.csv"
    report_path = rc.out_dir / f"report_{split}.json"
    features_path = rc.out_dir / f"features_{split}.csv"
    evaluation.write_scores_csv(scores_path, rows)
    payload = {"split": split, "threshold_split": rc.threshold_split,
               "fusion": rc.fusion, **evaluation.report_dict(report)}
    report_path.write_text(json.dumps(payload, indent=2) + "\n")
    evaluation.export_features(eval_samples, bundle, features_path,
                               include_content=rc.include_content_features)
    print(f"eval[{split}]: threshold {report.threshold:.6f} "
          f"APCER {report.apcer:.2f}% BPCER {report.bpcer:.2f}% ACER {report.acer:.2f}%")
    print(f"eval: wrote {scores_path}, {report_path}, {features_path}")
    return EXIT_OK


def cmd_cross_eval(args) -> int:
    rc = _load_config(args)
    target_root = args.target_root or rc.target_root
    if target_root is None:
        raise ValueError("cross-eval needs --target-root or the target_root config key")
    bundle = _load_bundle(rc, args.checkpoint)
    dev_rows = evaluation.score_samples(_load_split_samples(rc, rc.threshold_split),
                                        bundle, rc.fusion)
    threshold = evaluation.select_threshold(
        [r.score_fused for r in dev_rows], [r.label == "live" for r in dev_rows])
    rows = evaluation.score_samples(
        _load_split_samples(rc, rc.eval_split, root=Path(target_root)), bundle, rc.fusion)
    report = evaluation.build_report(rows, threshold)
    _finite_or_raise(report)

    rc.out_dir.mkdir(parents=True, exist_ok=True)
    scores_path = rc.out_dir / "cross_scores.csv"
    report_path = rc.out_dir / "cross_report.json"
    evaluation.write_scores_csv(scores_path, rows)
    payload = {"target_root": str(target_root), "split": rc.eval_split,
               "threshold_split": rc.threshold_split, "fusion": rc.fusion,
               **evaluation.report_dict(report)}
    report_path.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"cross-eval[{rc.eval_split}@{target_root}]: HTER {report.hter:.2f}% "
          f"at source threshold {report.threshold:.6f}")
    print(f"cross-eval: wrote {scores_path}, {report_path}")
    return EXIT_OK


def _normalize_map(arr: np.ndarray) -> np.ndarray:
    lo, hi = float(arr.min()), float(arr.max())
    return (arr - lo) / (hi - lo) if hi > lo else np.zeros_like(arr)


def cmd_translate(args) -> int:
    rc = _load_config(args)
    bundle = _load_bundle(rc, args.checkpoint)
    if args.image_a and args.image_b:
        image_a = dataio.load_image(args.image_a, rc.resolution)
        image_b = dataio.load_image(args.image_b, rc.resolution)
    else:
        samples = _load_split_samples(rc, rc.eval_split)
        image_a = next(s.image for s in samples if s.label == "live")
        image_b = next(s.image for s in samples if s.label == "spoof")

    out = evaluation.translate_pair(image_a, image_b, bundle)
    out_dir = rc.out_dir / "translate"
    out_dir.mkdir(parents=True, exist_ok=True)
    dataio.save_image(out_dir / "A.png", image_a)
    dataio.save_image(out_dir / "B.png", image_b)
    for name, item in out.items():
        dataio.save_image(out_dir / f"{name}.png", item["image"])
        dataio.save_map(out_dir / f"{name}_lbp.png", _normalize_map(item["lbp"]))
        dataio.save_map(out_dir / f"{name}_depth.png", _normalize_map(item["depth"]))
    deltas = {
        "delta_A_rec": (image_a, out["A_rec"]["image"]),
        "delta_B_rec": (image_b, out["B_rec"]["image"]),
        "delta_A_b": (image_a, out["A_b"]["image"]),
        "delta_B_a": (image_b, out["B_a"]["image"]),
    }
    for name, (orig, trans) in deltas.items():
        rgb = evaluation.delta_map(orig, trans)
        dataio.save_image(out_dir / f"{name}.png", rgb.astype(np.float32) / 255.0)
    print(f"translate: wrote panels and delta maps under {out_dir}")
    return EXIT_OK


def cmd_plot(args) -> int:
    rc = _load_config(args)
    features_path = args.features or (rc.out_dir / f"features_{rc.eval_split}.csv")
    if not Path(features_path).exists():
        raise MissingArtifactError(f"feature CSV not found: {features_path} (run eval first)")
    table = evaluation.read_features_csv(features_path)
    xy = evaluation.pca_2d(table.features)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    colors = {("live", "none"): "tab:green", ("spoof", "print"): "tab:red",
              ("spoof", "screen"): "tab:orange"}
    fig, ax = plt.subplots(figsize=(6, 5))
    groups = sorted(set(zip(table.labels, table.attack_types)))
    for key in groups:
        mask = [lt == key for lt in zip(table.labels, table.attack_types)]
        pts = xy[np.asarray(mask)]
        label = key[0] if key[1] == "none" else f"{key[0]}/{key[1]}"
        ax.scatter(pts[:, 0], pts[:, 1], s=14, alpha=0.8,
                   color=colors.get(key, "tab:gray"), label=label)
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    ax.set_title("liveness features, top-2 PCA")
    ax.legend()
    out_path = args.out or (rc.out_dir / "features_scatter.png")
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    print(f"plot: wrote {out_path}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
