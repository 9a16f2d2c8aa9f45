"""Flat key=value run configuration.

One namespace covers generation, training, networks, and evaluation options.
Unknown keys are rejected; paths are resolved relative to the config file;
``to_text`` emits the canonical resolved form, which parses back to the same
configuration (the round-trip behind the printed config header).
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from . import dataio, nets, trainer

# key -> (type tag, default). Tags: int, float, opt_float, str, bool, path,
# opt_path, ints (comma ints), strs (comma strings). Defaults are the
# documented ones; paths are relative to the config file location.
SCHEMA: dict[str, tuple[str, Any]] = {
    # paths
    "data_root": ("path", "data"),
    "out_dir": ("path", "out"),
    "checkpoint": ("path", "out/model.pt"),
    "depth_checkpoint": ("path", "out/depth.pt"),
    "log_csv": ("path", "out/train_log.csv"),
    "target_root": ("opt_path", None),
    # data generation
    "seed": ("int", 0),
    "resolution": ("int", 64),
    "train_live": ("int", 200),
    "train_spoof": ("int", 200),
    "dev_live": ("int", 50),
    "dev_spoof": ("int", 50),
    "test_live": ("int", 100),
    "test_spoof": ("int", 100),
    "attacks": ("strs", ("print", "screen")),
    # training
    "batch_size": ("int", 4),
    "lr": ("float", 1e-5),
    "pretrain_lr": ("opt_float", None),
    "lambda_img": ("float", 10.0),
    "lambda_latent": ("float", 1.0),
    "lambda_depth": ("float", 1.0),
    "lambda_lbp": ("float", 2.0),
    "steps": ("int", 2000),
    "checkpoint_interval": ("int", 500),
    "pretrain_epochs": ("int", 10),
    # networks
    "stem_channels": ("ints", (32, 64, 128)),
    "content_channels": ("int", 112),
    "liveness_channels": ("int", 128),
    "lbp_channels": ("ints", (384, 128, 64)),
    "depth_stem_channels": ("int", 64),
    "depth_block_channels": ("ints", (128, 196, 128)),
    "depth_head_channels": ("ints", (128, 64)),
    "disc_channels": ("ints", (64, 128, 256)),
    # evaluation
    "fusion": ("str", "mean"),
    "eval_split": ("str", "test"),
    "threshold_split": ("str", "dev"),
    "include_content_features": ("bool", False),
}


@dataclass(frozen=True)
class RunConfig:
    data_root: Path
    out_dir: Path
    checkpoint: Path
    depth_checkpoint: Path
    log_csv: Path
    target_root: Path | None
    seed: int
    resolution: int
    train_live: int
    train_spoof: int
    dev_live: int
    dev_spoof: int
    test_live: int
    test_spoof: int
    attacks: tuple[str, ...]
    batch_size: int
    lr: float
    pretrain_lr: float | None
    lambda_img: float
    lambda_latent: float
    lambda_depth: float
    lambda_lbp: float
    steps: int
    checkpoint_interval: int
    pretrain_epochs: int
    stem_channels: tuple[int, ...]
    content_channels: int
    liveness_channels: int
    lbp_channels: tuple[int, ...]
    depth_stem_channels: int
    depth_block_channels: tuple[int, ...]
    depth_head_channels: tuple[int, ...]
    disc_channels: tuple[int, ...]
    fusion: str
    eval_split: str
    threshold_split: str
    include_content_features: bool


def _parse_value(key: str, tag: str, raw: str, base: Path):
    raw = raw.strip()
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "opt_float":
            return float(raw) if raw else None
        if tag == "str":
            return raw
        if tag == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if tag == "path":
            if not raw:
                raise ValueError("empty path")
            return _resolve(base, raw)
        if tag == "opt_path":
            return _resolve(base, raw) if raw else None
        if tag == "ints":
            return tuple(int(v) for v in raw.split(","))
        if tag == "strs":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r}") from exc
    raise AssertionError(f"unhandled tag {tag}")


def _resolve(base: Path, raw: str) -> Path:
    p = Path(raw)
    return p if p.is_absolute() else (base / p).resolve()


def _format_value(tag: str, value) -> str:
    if value is None:
        return ""
    if tag in ("ints", "strs"):
        return ",".join(str(v) for v in value)
    if tag == "bool":
        return "true" if value else "false"
    if tag in ("float", "opt_float"):
        return repr(value)
    return str(value)


def parse_text(text: str, base_dir: Path) -> RunConfig:
    """Parse flat key=value lines; '#' lines and blanks ignored."""
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate config key {key!r}")
        tag, _ = SCHEMA[key]
        values[key] = _parse_value(key, tag, raw, base_dir)
    for key, (tag, default) in SCHEMA.items():
        if key not in values:
            values[key] = _resolve(base_dir, default) if tag == "path" else default
    return RunConfig(**values)


def load(path: Path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ValueError(f"config file not found: {path}")
    rc = parse_text(path.read_text(), path.parent.resolve())
    if seed_override is not None:
        rc = replace_seed(rc, seed_override)
    return rc


def replace_seed(rc: RunConfig, seed: int) -> RunConfig:
    from dataclasses import replace

    return replace(rc, seed=seed)


def to_text(rc: RunConfig) -> str:
    """Canonical resolved form; parses back to an equal RunConfig."""
    lines = [f"{key} = {_format_value(tag, getattr(rc, key))}"
             for key, (tag, _) in SCHEMA.items()]
    return "\n".join(lines) + "\n"


def to_dict(rc: RunConfig) -> dict[str, str]:
    """Canonical strings per key — the config echo stored in checkpoints."""
    return {key: _format_value(tag, getattr(rc, key)) for key, (tag, _) in SCHEMA.items()}


def gen_config(rc: RunConfig) -> dataio.GenConfig:
    return dataio.GenConfig(
        root=rc.data_root, resolution=rc.resolution, seed=rc.seed,
        counts={"train": (rc.train_live, rc.train_spoof),
                "dev": (rc.dev_live, rc.dev_spoof),
                "test": (rc.test_live, rc.test_spoof)},
        attacks=rc.attacks,
    )


def train_config(rc: RunConfig) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        resolution=rc.resolution, batch_size=rc.batch_size, lr=rc.lr,
        loss_weights=(rc.lambda_img, rc.lambda_latent, rc.lambda_depth, rc.lambda_lbp),
        steps=rc.steps, seed=rc.seed, checkpoint_interval=rc.checkpoint_interval,
        pretrain_epochs=rc.pretrain_epochs, pretrain_lr=rc.pretrain_lr,
    )


def net_config(rc: RunConfig) -> nets.NetConfig:
    if len(rc.stem_channels) != 3 or len(rc.depth_block_channels) != 3:
        raise ValueError("stem_channels and depth_block_channels need exactly three entries")
    return nets.NetConfig(
        resolution=rc.resolution,
        stem_channels=tuple(rc.stem_channels),
        content_channels=rc.content_channels,
        liveness_channels=rc.liveness_channels,
        lbp_channels=rc.lbp_channels,
        depth_stem_channels=rc.depth_stem_channels,
        depth_block_channels=tuple(rc.depth_block_channels),
        depth_head_channels=rc.depth_head_channels,
        disc_channels=rc.disc_channels,
    )


def validate(rc: RunConfig) -> None:
    """Cross-field checks shared by every command."""
    if rc.fusion not in ("mean", "max"):
        raise ValueError(f"fusion must be mean or max, got {rc.fusion!r}")
    for key in ("eval_split", "threshold_split"):
        if getattr(rc, key) not in dataio.SPLITS:
            raise ValueError(f"{key} must be one of {dataio.SPLITS}, got {getattr(rc, key)!r}")
