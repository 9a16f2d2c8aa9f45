"""Synthetic live/spoof dataset generation and on-disk ingestion.

Dataset layout: ``root/{train,dev,test}/{live,spoof}/*.png`` with 8-bit
grayscale depth sidecars ``*.depth.png`` at 1/8 resolution and a per-split
``manifest.csv`` (columns ``path,label,attack_type,depth_path``, paths
relative to the split directory). Spoof images additionally carry a
``*.facedepth.png`` sidecar holding the depth of the underlying face content,
which the depth supervision needs even though the spoof ground truth itself
is the zero map.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import texture
from .errors import DataError, MissingArtifactError

SPLITS = ("train", "dev", "test")
LABELS = ("live", "spoof")
ATTACK_TYPES = ("none", "print", "screen")
MAP_FACTOR = 8  # auxiliary maps live at H/8

MANIFEST_COLUMNS = ("path", "label", "attack_type", "depth_path")
FACEDEPTH_SUFFIX = ".facedepth.png"


@dataclass
class ImageSample:
    """One face image with ground-truth auxiliary maps.

    ``depth_gt``/``lbp_gt`` follow the zero-map convention for spoof samples;
    ``face_depth`` keeps the depth of the face content regardless of label
    (for live samples it equals ``depth_gt``).
    """

    image: np.ndarray       # H×W×3 float32 in [0,1]
    label: str              # "live" | "spoof"
    attack_type: str        # "none" | "print" | "screen"
    lbp_gt: np.ndarray      # (H/8)×(W/8) float32 in [0,1]
    depth_gt: np.ndarray    # (H/8)×(W/8) float32 in [0,1]
    face_depth: np.ndarray  # (H/8)×(W/8) float32 in [0,1]
    source_id: str

    def __post_init__(self) -> None:
        h, w, c = self.image.shape
        if h != w or c != 3:
            raise ValueError(f"{self.source_id}: image must be square H×W×3, got {self.image.shape}")
        if self.image.min() < 0.0 or self.image.max() > 1.0:
            raise ValueError(f"{self.source_id}: image values outside [0,1]")
        if self.label not in LABELS:
            raise ValueError(f"{self.source_id}: bad label {self.label!r}")
        if self.attack_type not in ATTACK_TYPES:
            raise ValueError(f"{self.source_id}: bad attack_type {self.attack_type!r}")
        m = h // MAP_FACTOR
        for name, arr in (("lbp_gt", self.lbp_gt), ("depth_gt", self.depth_gt),
                          ("face_depth", self.face_depth)):
            if arr.shape != (m, m):
                raise ValueError(f"{self.source_id}: {name} must be {m}×{m}, got {arr.shape}")
        if self.label == "spoof":
            if np.any(self.lbp_gt) or np.any(self.depth_gt):
                raise ValueError(f"{self.source_id}: spoof sample must have zero lbp/depth maps")
        elif not np.any(self.depth_gt > 0):
            raise ValueError(f"{self.source_id}: live sample needs a positive depth entry")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    attack_type: str
    depth_path: str


@dataclass(frozen=True)
class DatasetManifest:
    root_path: Path  # split directory the entry paths are relative to
    split: str
    entries: tuple[ManifestEntry, ...]


@dataclass(frozen=True)
class GenConfig:
    root: Path
    resolution: int = 64
    seed: int = 0
    counts: Mapping[str, tuple[int, int]] = field(
        default_factory=lambda: {"train": (200, 200), "dev": (50, 50), "test": (100, 100)}
    )
    attacks: tuple[str, ...] = ("print", "screen")

    def __post_init__(self) -> None:
        if self.resolution % MAP_FACTOR:
            raise ValueError(f"resolution must be divisible by {MAP_FACTOR}, got {self.resolution}")
        if self.resolution < 16:
            raise ValueError(f"resolution too small to place a face: {self.resolution}")
        for split in self.counts:
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r}")
        for split, (n_live, n_spoof) in self.counts.items():
            if n_live < 0 or n_spoof < 0:
                raise ValueError(f"negative count for split {split!r}")
        if not self.attacks:
            raise ValueError("need at least one attack type")
        for kind in self.attacks:
            if kind not in ("print", "screen"):
                raise ValueError(f"unknown attack type {kind!r}")


def synthesize_live(rng: np.random.Generator, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Render one live face: shaded ellipsoid on a textured background.

    Returns (image H×W×3 in [0,1], analytic depth map at H/8 in [0,1]).
    Hue, position, face size, light direction and global illumination are
    drawn from ``rng``; the depth map is the ellipsoid height, zero off-face.
    """
    r = resolution
    coarse = rng.random((max(2, r // 16), max(2, r // 16))).astype(np.float32)
    bg_tex = _bilinear_resize(coarse, r)
    tint = (0.25 + 0.5 * rng.random(3)).astype(np.float32)
    img = tint[None, None, :] * (0.6 + 0.4 * bg_tex[..., None])

    cy = r * (0.5 + 0.12 * (rng.random() - 0.5))
    cx = r * (0.5 + 0.12 * (rng.random() - 0.5))
    ay = r * (0.30 + 0.05 * rng.random())
    ax = r * (0.22 + 0.04 * rng.random())
    yy, xx = np.mgrid[0:r, 0:r]
    u = (yy + 0.5 - cy) / ay
    v = (xx + 0.5 - cx) / ax
    height = np.sqrt(np.clip(1.0 - u * u - v * v, 0.0, None)).astype(np.float32)
    face = height > 0

    skin = np.array([0.70 + 0.18 * rng.random(),
                     0.48 + 0.16 * rng.random(),
                     0.36 + 0.14 * rng.random()], dtype=np.float32)
    lx, ly = rng.uniform(-0.6, 0.6, size=2)
    shade = np.clip(0.55 + 0.45 * height + 0.18 * (lx * v + ly * u), 0.0, 1.25)
    img = np.where(face[..., None], skin[None, None, :] * shade[..., None].astype(np.float32), img)

    for ex in (cx - 0.45 * ax, cx + 0.45 * ax):
        eye = ((yy + 0.5 - (cy - 0.30 * ay)) ** 2 + (xx + 0.5 - ex) ** 2) < (0.12 * ax) ** 2
        img[eye] = 0.15
    mouth = (np.abs(yy + 0.5 - (cy + 0.45 * ay)) < 0.07 * ay) & (np.abs(xx + 0.5 - cx) < 0.35 * ax)
    img[mouth] *= 0.45

    img = np.clip(img * rng.uniform(0.75, 1.10), 0.0, 1.0).astype(np.float32)
    depth = texture.average_pool(height, r // MAP_FACTOR).astype(np.float32)
    return img, depth


def apply_attack(image: np.ndarray, kind: str, rng: np.random.Generator) -> np.ndarray:
    """Composite a presentation-attack artifact onto an image.

    ``screen`` adds a moiré-style stripe interference pattern; ``print`` adds
    paper grain, ink desaturation and a faint rectangular border.
    """
    r = image.shape[0]
    img = image.astype(np.float64).copy()
    if kind == "screen":
        yy, xx = np.mgrid[0:r, 0:r]
        theta = rng.uniform(0.0, np.pi)
        theta2 = theta + rng.uniform(0.05, 0.35)
        f1 = rng.uniform(0.18, 0.42)
        f2 = f1 * rng.uniform(0.85, 1.15)
        stripes = np.sin(2 * np.pi * f1 * (xx * np.cos(theta) + yy * np.sin(theta))
                         + rng.uniform(0, 2 * np.pi))
        carrier = np.sin(2 * np.pi * f2 * (xx * np.cos(theta2) + yy * np.sin(theta2))
                         + rng.uniform(0, 2 * np.pi))
        pattern = 0.6 * stripes + 0.4 * stripes * carrier
        amp = rng.uniform(0.05, 0.10)
        chroma = 1.0 + 0.25 * (rng.random(3) - 0.5)
        img += amp * pattern[..., None] * chroma[None, None, :]
    elif kind == "print":
        gray = img.mean(axis=2, keepdims=True)
        img = 0.82 * img + 0.18 * gray
        img += rng.normal(0.0, rng.uniform(0.02, 0.04), size=img.shape)
        margin = int(rng.integers(r // 16, r // 8 + 1))
        width = max(1, r // 64)
        border = np.zeros((r, r), dtype=bool)
        border[margin:r - margin, margin:margin + width] = True
        border[margin:r - margin, r - margin - width:r - margin] = True
        border[margin:margin + width, margin:r - margin] = True
        border[r - margin - width:r - margin, margin:r - margin] = True
        img[border] *= rng.uniform(0.72, 0.85)
    else:
        raise ValueError(f"unknown attack type {kind!r}")
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def generate_synthetic_dataset(config: GenConfig) -> dict[str, DatasetManifest]:
    """Write the synthetic dataset to disk; returns one manifest per split.

    Fully determined by (config, seed): each image draws from its own
    ``default_rng([seed, split, label, index])`` stream, so regeneration is
    byte-identical regardless of ordering.
    """
    manifests: dict[str, DatasetManifest] = {}
    map_size = config.resolution // MAP_FACTOR
    zero_depth = np.zeros((map_size, map_size), dtype=np.float32)
    for split_idx, split in enumerate(SPLITS):
        n_live, n_spoof = config.counts.get(split, (0, 0))
        if n_live == 0 and n_spoof == 0:
            continue
        split_dir = Path(config.root) / split
        (split_dir / "live").mkdir(parents=True, exist_ok=True)
        (split_dir / "spoof").mkdir(parents=True, exist_ok=True)
        entries = []
        for i in range(n_live):
            rng = np.random.default_rng([config.seed, split_idx, 0, i])
            img, depth = synthesize_live(rng, config.resolution)
            name = f"live_{i:04d}"
            _save_rgb(split_dir / "live" / f"{name}.png", img)
            _save_gray(split_dir / "live" / f"{name}.depth.png", depth)
            entries.append(ManifestEntry(f"live/{name}.png", "live", "none",
                                         f"live/{name}.depth.png"))
        for i in range(n_spoof):
            rng = np.random.default_rng([config.seed, split_idx, 1, i])
            base, face_depth = synthesize_live(rng, config.resolution)
            kind = config.attacks[i % len(config.attacks)]
            img = apply_attack(base, kind, rng)
            name = f"spoof_{i:04d}"
            _save_rgb(split_dir / "spoof" / f"{name}.png", img)
            _save_gray(split_dir / "spoof" / f"{name}.depth.png", zero_depth)
            _save_gray(split_dir / "spoof" / f"{name}{FACEDEPTH_SUFFIX}", face_depth)
            entries.append(ManifestEntry(f"spoof/{name}.png", "spoof", kind,
                                         f"spoof/{name}.depth.png"))
        manifest = DatasetManifest(split_dir, split, tuple(entries))
        _write_manifest(split_dir / "manifest.csv", manifest)
        manifests[split] = manifest
    return manifests


def load_manifest(root: Path, split: str) -> DatasetManifest:
    """Read and validate ``root/<split>/manifest.csv``."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    split_dir = Path(root) / split
    manifest_path = split_dir / "manifest.csv"
    if not manifest_path.exists():
        raise MissingArtifactError(f"manifest not found: {manifest_path}")
    entries = []
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise ValueError(f"{manifest_path}: expected columns {MANIFEST_COLUMNS}, "
                             f"got {reader.fieldnames}")
        for row in reader:
            if row["label"] not in LABELS:
                raise ValueError(f"{manifest_path}: bad label {row['label']!r}")
            if row["attack_type"] not in ATTACK_TYPES:
                raise ValueError(f"{manifest_path}: bad attack_type {row['attack_type']!r}")
            entry = ManifestEntry(row["path"], row["label"], row["attack_type"],
                                  row["depth_path"])
            if not (split_dir / entry.path).exists():
                raise DataError(f"missing image file: {split_dir / entry.path}")
            entries.append(entry)
    return DatasetManifest(split_dir, split, tuple(entries))


def load_dataset(manifest: DatasetManifest, resolution: int) -> list[ImageSample]:
    """Load every manifest entry as an ImageSample at the given resolution."""
    if resolution % MAP_FACTOR:
        raise ValueError(f"resolution must be divisible by {MAP_FACTOR}, got {resolution}")
    map_size = resolution // MAP_FACTOR
    zeros = np.zeros((map_size, map_size), dtype=np.float32)
    samples = []
    for entry in manifest.entries:
        img_path = manifest.root_path / entry.path
        img = _load_rgb(img_path, resolution)
        if entry.label == "live":
            depth_path = manifest.root_path / entry.depth_path
            if not depth_path.exists():
                raise DataError(f"live sample missing depth sidecar: {entry.depth_path}")
            depth = _load_gray(depth_path, map_size)
            lbp = texture.lbp_gt_map(img, map_size)
            face_depth = depth
        else:
            depth = zeros
            lbp = zeros
            facedepth_path = manifest.root_path / entry.path.replace(".png", FACEDEPTH_SUFFIX)
            face_depth = _load_gray(facedepth_path, map_size) if facedepth_path.exists() else zeros
        samples.append(ImageSample(
            image=img, label=entry.label, attack_type=entry.attack_type,
            lbp_gt=lbp, depth_gt=depth, face_depth=face_depth,
            source_id=f"{manifest.split}/{entry.path}",
        ))
    return samples


def balanced_batches(
    samples: Sequence[ImageSample], batch_size: int, seed
) -> Iterator[tuple[list[ImageSample], list[ImageSample]]]:
    """Yield (live, spoof) half-batches: one epoch over the smaller class.

    Each yield holds batch_size/2 samples per class; within the epoch no
    sample of a class repeats. Order is a pure function of ``seed``.
    """
    if batch_size % 2 or batch_size < 2:
        raise ValueError(f"batch_size must be even and positive, got {batch_size}")
    half = batch_size // 2
    live = [s for s in samples if s.label == "live"]
    spoof = [s for s in samples if s.label == "spoof"]
    if len(live) < half or len(spoof) < half:
        raise ValueError(f"need at least {half} samples per class, "
                         f"got {len(live)} live / {len(spoof)} spoof")
    rng = np.random.default_rng(seed)
    live_order = rng.permutation(len(live))
    spoof_order = rng.permutation(len(spoof))
    for i in range(min(len(live), len(spoof)) // half):
        yield ([live[j] for j in live_order[i * half:(i + 1) * half]],
               [spoof[j] for j in spoof_order[i * half:(i + 1) * half]])


def stack_images(samples: Sequence[ImageSample]) -> np.ndarray:
    """N×H×W×3 float32 batch array."""
    return np.stack([s.image for s in samples])


def load_image(path: Path, resolution: int) -> np.ndarray:
    """Read a single RGB image as H×W×3 float32 in [0, 1]."""
    if not Path(path).exists():
        raise MissingArtifactError(f"image not found: {path}")
    return _load_rgb(Path(path), resolution)


def save_image(path: Path, image: np.ndarray) -> None:
    """Write an H×W×3 float32 [0, 1] array as an 8-bit PNG."""
    _save_rgb(Path(path), np.clip(image, 0.0, 1.0))


def save_map(path: Path, arr: np.ndarray) -> None:
    """Write an H×W float32 [0, 1] array as an 8-bit grayscale PNG."""
    _save_gray(Path(path), np.clip(arr, 0.0, 1.0))


def _bilinear_resize(arr: np.ndarray, size: int) -> np.ndarray:
    im = Image.fromarray(np.ascontiguousarray(arr, dtype=np.float32), mode="F")
    return np.asarray(im.resize((size, size), Image.BILINEAR), dtype=np.float32)


def _save_rgb(path: Path, img: np.ndarray) -> None:
    Image.fromarray(np.round(img * 255.0).astype(np.uint8)).save(path, format="PNG")


def _save_gray(path: Path, arr: np.ndarray) -> None:
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path, format="PNG")


def _load_rgb(path: Path, resolution: int) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            if im.size != (resolution, resolution):
                im = im.resize((resolution, resolution), Image.BILINEAR)
            return np.asarray(im, dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def _load_gray(path: Path, size: int) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im = im.convert("L")
            if im.size != (size, size):
                im = im.resize((size, size), Image.BILINEAR)
            return np.asarray(im, dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"cannot read depth map {path}: {exc}") from exc


def _write_manifest(path: Path, manifest: DatasetManifest) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            writer.writerow([e.path, e.label, e.attack_type, e.depth_path])
