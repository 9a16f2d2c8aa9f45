"""Network blocks: disentangling encoder, shortcut decoder, LBP and depth
estimators, and a pair of two-scale discriminators.

Every conv layer is 3×3 followed by BatchNorm + ReLU, except declared-linear
output layers (LBP/depth heads, decoder output conv, discriminator fc) so
zero-valued targets stay exactly reachable. Channel defaults follow the
published auxiliary-net table; everything is configurable for desk-scale runs.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .errors import MissingArtifactError

CHECKPOINT_FORMAT_VERSION = 1

MODULE_NAMES = ("encoder", "decoder", "lbp_net", "depth_net", "disc1", "disc2")


@dataclass(frozen=True)
class NetConfig:
    resolution: int = 64
    stem_channels: tuple[int, int, int] = (32, 64, 128)
    content_channels: int = 112
    liveness_channels: int = 128
    lbp_channels: tuple[int, ...] = (384, 128, 64)
    depth_stem_channels: int = 64
    depth_block_channels: tuple[int, int, int] = (128, 196, 128)
    depth_head_channels: tuple[int, ...] = (128, 64)
    disc_channels: tuple[int, ...] = (64, 128, 256)

    def __post_init__(self) -> None:
        for name in ("stem_channels", "lbp_channels", "depth_block_channels",
                     "depth_head_channels", "disc_channels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.resolution % 8:
            raise ValueError(f"resolution must be divisible by 8, got {self.resolution}")
        if len(self.stem_channels) != 3:
            raise ValueError("stem_channels needs exactly three stride-2 stages")
        if len(self.depth_block_channels) != 3:
            raise ValueError("depth_block_channels needs exactly three entries")
        down = 2 ** len(self.disc_channels)
        if self.resolution // 2 < down:
            raise ValueError(f"resolution {self.resolution} too small for "
                             f"{len(self.disc_channels)} discriminator pool stages at scale 2")
        for f_ in fields(self):
            value = getattr(self, f_.name)
            flat = value if isinstance(value, tuple) else (value,)
            if any(int(v) <= 0 for v in flat):
                raise ValueError(f"{f_.name} must be positive, got {value}")

    @property
    def map_size(self) -> int:
        return self.resolution // 8


@dataclass
class LatentCode:
    """Encoder output: content + liveness features at H/8 plus U-Net shortcuts.

    Shortcuts are the stem activations at H/2 and H/4 of the image whose
    content the code carries; they aid the decoder and are not part of the
    latent code proper.
    """

    content: Tensor    # N×C_c×(H/8)×(W/8)
    liveness: Tensor   # N×C_l×(H/8)×(W/8)
    shortcuts: tuple[Tensor, Tensor]  # activations at H/2, H/4

    @property
    def concat(self) -> Tensor:
        """Channel-concatenated (content, liveness) — the z_i of the latent loss."""
        return torch.cat([self.content, self.liveness], dim=1)


def conv_block(cin: int, cout: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class Encoder(nn.Module):
    """Three stride-2 stem stages, then parallel liveness/content branches."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        c1, c2, c3 = cfg.stem_channels
        self.stem1 = conv_block(3, c1, stride=2)   # H/2
        self.stem2 = conv_block(c1, c2, stride=2)  # H/4
        self.stem3 = conv_block(c2, c3, stride=2)  # H/8
        self.liveness_branch = nn.Sequential(
            conv_block(c3, c3), nn.Conv2d(c3, cfg.liveness_channels, 3, padding=1))
        self.content_branch = nn.Sequential(
            conv_block(c3, c3), nn.Conv2d(c3, cfg.content_channels, 3, padding=1))

    def forward(self, x: Tensor) -> LatentCode:
        if x.dim() != 4 or x.shape[-1] != x.shape[-2] or x.shape[-1] % 8:
            raise ValueError(f"expected N×3×H×H input with H divisible by 8, got {tuple(x.shape)}")
        s1 = self.stem1(x)
        s2 = self.stem2(s1)
        z = self.stem3(s2)
        return LatentCode(content=self.content_branch(z),
                          liveness=self.liveness_branch(z),
                          shortcuts=(s1, s2))


class Decoder(nn.Module):
    """Mirror of the encoder: upsample stages with shortcut concatenation."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        c1, c2, c3 = cfg.stem_channels
        self.up3 = conv_block(cfg.content_channels + cfg.liveness_channels, c3)
        self.up2 = conv_block(c3 + c2, c2)
        self.up1 = conv_block(c2 + c1, c1)
        self.out = nn.Conv2d(c1, 3, 3, padding=1)

    def forward(self, content: Tensor, liveness: Tensor,
                shortcuts: tuple[Tensor, Tensor]) -> Tensor:
        s1, s2 = shortcuts
        x = self.up3(torch.cat([content, liveness], dim=1))
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = self.up2(torch.cat([x, s2], dim=1))
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = self.up1(torch.cat([x, s1], dim=1))
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return torch.sigmoid(self.out(x))


class LbpNet(nn.Module):
    """Stride-1 conv stack over liveness features; linear single-channel head."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        chans = (cfg.liveness_channels, *cfg.lbp_channels)
        self.features = nn.Sequential(
            *[conv_block(a, b) for a, b in zip(chans, chans[1:])])
        self.out = nn.Conv2d(chans[-1], 1, 3, padding=1)

    def forward(self, liveness: Tensor) -> Tensor:
        return self.out(self.features(liveness))


class DepthNet(nn.Module):
    """Three pooled conv blocks whose pooled maps are resized to H/8,
    concatenated, and reduced to a single-channel map by a linear head."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        b1, b2, b3 = cfg.depth_block_channels

        def block(cin: int) -> nn.Sequential:
            return nn.Sequential(conv_block(cin, b1), conv_block(b1, b2),
                                 conv_block(b2, b3), nn.MaxPool2d(2))

        self.stem = conv_block(3, cfg.depth_stem_channels)
        self.block1 = block(cfg.depth_stem_channels)
        self.block2 = block(b3)
        self.block3 = block(b3)
        head_chans = (3 * b3, *cfg.depth_head_channels)
        self.head = nn.Sequential(
            *[conv_block(a, b) for a, b in zip(head_chans, head_chans[1:])],
            nn.Conv2d(head_chans[-1], 1, 3, padding=1))

    def forward(self, x: Tensor) -> Tensor:
        p1 = self.block1(self.stem(x))  # H/2
        p2 = self.block2(p1)            # H/4
        p3 = self.block3(p2)            # H/8
        size = p3.shape[-2:]
        pooled = torch.cat([
            F.interpolate(p1, size=size, mode="bilinear", align_corners=False),
            F.interpolate(p2, size=size, mode="bilinear", align_corners=False),
            p3,
        ], dim=1)
        return self.head(pooled)


class Discriminator(nn.Module):
    """Conv/pool pyramid, vectorize, linear fc to two logits.

    ``scale=2`` average-pools the input ×2 first, giving the second
    discriminator its lower-resolution view of the same images.
    """

    def __init__(self, cfg: NetConfig, scale: int):
        super().__init__()
        if scale not in (1, 2):
            raise ValueError(f"scale must be 1 or 2, got {scale}")
        self.scale = scale
        layers: list[nn.Module] = []
        prev = 3
        for c in cfg.disc_channels:
            layers += [conv_block(prev, c), nn.MaxPool2d(2)]
            prev = c
        self.features = nn.Sequential(*layers)
        feat_size = cfg.resolution // scale // (2 ** len(cfg.disc_channels))
        self.fc = nn.Linear(prev * feat_size * feat_size, 2)

    def forward(self, x: Tensor) -> Tensor:
        if self.scale == 2:
            x = F.avg_pool2d(x, 2)
        return self.fc(self.features(x).flatten(1))


def real_probability(disc: Discriminator, images: Tensor) -> Tensor:
    """P(real) per image: softmax component 0 of the two-logit head."""
    return torch.softmax(disc(images), dim=1)[:, 0]


@dataclass
class ModelBundle:
    encoder: Encoder
    decoder: Decoder
    lbp_net: LbpNet
    depth_net: DepthNet
    disc1: Discriminator
    disc2: Discriminator
    config: NetConfig = field(default_factory=NetConfig)


def build_models(cfg: NetConfig, seed: int = 0) -> ModelBundle:
    """Construct all six networks with seed-controlled initialization."""
    torch.manual_seed(seed)
    return ModelBundle(
        encoder=Encoder(cfg), decoder=Decoder(cfg), lbp_net=LbpNet(cfg),
        depth_net=DepthNet(cfg), disc1=Discriminator(cfg, scale=1),
        disc2=Discriminator(cfg, scale=2), config=cfg,
    )


def iter_modules(bundle: ModelBundle) -> tuple[nn.Module, ...]:
    return tuple(getattr(bundle, name) for name in MODULE_NAMES)


def set_eval(bundle: ModelBundle) -> None:
    for module in iter_modules(bundle):
        module.eval()


def set_train(bundle: ModelBundle) -> None:
    for module in iter_modules(bundle):
        module.train()


def generator_parameters(bundle: ModelBundle) -> list[nn.Parameter]:
    """Parameters updated by the generator step: encoder + decoder + lbp_net."""
    out: list[nn.Parameter] = []
    for module in (bundle.encoder, bundle.decoder, bundle.lbp_net):
        out.extend(module.parameters())
    return out


def discriminator_parameters(bundle: ModelBundle) -> list[nn.Parameter]:
    out: list[nn.Parameter] = []
    for module in (bundle.disc1, bundle.disc2):
        out.extend(module.parameters())
    return out


def parameter_hash(module: nn.Module, include_buffers: bool = True) -> str:
    """SHA-256 over parameter (and, by default, buffer) names + raw bytes.

    ``include_buffers=False`` hashes trainable parameters only — the right
    view for update-isolation checks, since forward passes in training mode
    legitimately move BatchNorm running statistics.
    """
    digest = hashlib.sha256()
    items = module.state_dict().items() if include_buffers \
        else module.named_parameters()
    for name, tensor in sorted(items):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def save_checkpoint(path: Path, bundle: ModelBundle, optimizers: dict,
                    step: int, run_config: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "net_config": asdict(bundle.config),
        "step": step,
        "models": {name: getattr(bundle, name).state_dict() for name in MODULE_NAMES},
        "optimizers": {name: opt.state_dict() for name, opt in optimizers.items()},
        "run_config": dict(run_config or {}),
    }
    torch.save(payload, path)


def load_checkpoint(path: Path) -> tuple[ModelBundle, dict]:
    """Rebuild a ModelBundle from a checkpoint; returns (bundle, payload)."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {version!r} in {path}")
    cfg = NetConfig(**payload["net_config"])
    bundle = build_models(cfg, seed=0)
    for name in MODULE_NAMES:
        getattr(bundle, name).load_state_dict(payload["models"][name])
    return bundle, payload
