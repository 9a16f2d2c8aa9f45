"""Depth-net pretraining and the two-step alternating adversarial loop.

Each iteration runs two consecutive steps: first the discriminators update on
real vs generated images, then the encoder+decoder+LBP net update under the
full weighted objective. The depth net is pretrained, then frozen; it only
supplies supervision. Single-threaded runs are exactly reproducible from
(config, seed): initialization is torch-seeded and the per-epoch batch order
comes from ``default_rng([seed, stream, epoch])``, so resuming from a
checkpoint recomputes its position instead of serializing RNG state.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import Tensor

from . import losses, nets
from .dataio import ImageSample, balanced_batches
from .errors import NumericError

LOG_COLUMNS = ("step", "img_rec", "latent_rec", "lbp", "depth", "gen_adv", "disc", "total")

# distinct default_rng streams so pretraining shuffles never collide with the
# main loop's epoch permutations
_MAIN_STREAM, _PRETRAIN_STREAM = 0, 1


@dataclass(frozen=True)
class TrainConfig:
    resolution: int = 64
    batch_size: int = 4
    lr: float = 1e-5
    loss_weights: tuple[float, float, float, float] = losses.DEFAULT_WEIGHTS
    steps: int = 2000
    seed: int = 0
    checkpoint_interval: int = 500
    pretrain_epochs: int = 10
    pretrain_lr: float | None = None
    betas: tuple[float, float] = (0.9, 0.999)

    def __post_init__(self) -> None:
        object.__setattr__(self, "loss_weights", tuple(float(v) for v in self.loss_weights))
        object.__setattr__(self, "betas", tuple(float(v) for v in self.betas))
        if self.batch_size % 2 or self.batch_size < 2:
            raise ValueError(f"batch_size must be even and >= 2, got {self.batch_size}")
        if self.lr <= 0 or (self.pretrain_lr is not None and self.pretrain_lr <= 0):
            raise ValueError("learning rates must be positive")
        if len(self.loss_weights) != 4 or any(w < 0 for w in self.loss_weights):
            raise ValueError(f"loss_weights must be four nonnegative values, got {self.loss_weights}")
        if self.steps < 0 or self.checkpoint_interval < 1 or self.pretrain_epochs < 0:
            raise ValueError("steps/checkpoint_interval/pretrain_epochs out of range")

    @property
    def effective_pretrain_lr(self) -> float:
        return self.pretrain_lr if self.pretrain_lr is not None else self.lr


@dataclass
class TensorBatch:
    images: Tensor      # N×3×H×W float32
    live_mask: Tensor   # N bool
    lbp_gt: Tensor      # N×m×m
    depth_gt: Tensor    # N×m×m
    face_depth: Tensor  # N×m×m


def batch_tensors(samples: Sequence[ImageSample]) -> TensorBatch:
    images = np.ascontiguousarray(np.stack([s.image for s in samples]).transpose(0, 3, 1, 2))
    return TensorBatch(
        images=torch.from_numpy(images),
        live_mask=torch.tensor([s.label == "live" for s in samples]),
        lbp_gt=torch.from_numpy(np.stack([s.lbp_gt for s in samples])),
        depth_gt=torch.from_numpy(np.stack([s.depth_gt for s in samples])),
        face_depth=torch.from_numpy(np.stack([s.face_depth for s in samples])),
    )


def freeze_depth(depth_net: nets.DepthNet) -> None:
    """Frozen supervision: no gradients, no running-stat drift."""
    depth_net.eval()
    for p in depth_net.parameters():
        p.requires_grad_(False)


def build_optimizers(bundle: nets.ModelBundle, config: TrainConfig) -> dict[str, torch.optim.Adam]:
    return {
        "gen": torch.optim.Adam(nets.generator_parameters(bundle),
                                lr=config.lr, betas=config.betas),
        "disc": torch.optim.Adam(nets.discriminator_parameters(bundle),
                                 lr=config.lr, betas=config.betas),
    }


def pretrain_depth(samples: Sequence[ImageSample], config: TrainConfig,
                   net_config: nets.NetConfig | None = None,
                   depth_net: nets.DepthNet | None = None,
                   log: Callable[[str], None] = print) -> nets.DepthNet:
    """Mean-L1 regression of the depth net to its ground truth maps."""
    if not samples:
        raise ValueError("empty dataset")
    if depth_net is None:
        torch.manual_seed(config.seed)
        depth_net = nets.DepthNet(net_config or nets.NetConfig(resolution=config.resolution))
    for p in depth_net.parameters():
        p.requires_grad_(True)
    optimizer = torch.optim.Adam(depth_net.parameters(),
                                 lr=config.effective_pretrain_lr, betas=config.betas)
    depth_net.train()
    for epoch in range(config.pretrain_epochs):
        order = np.random.default_rng([config.seed, _PRETRAIN_STREAM, epoch]).permutation(len(samples))
        epoch_losses = []
        for start in range(0, len(order) - config.batch_size + 1, config.batch_size):
            batch = batch_tensors([samples[i] for i in order[start:start + config.batch_size]])
            optimizer.zero_grad()
            loss = losses.depth_loss(batch.images, batch.live_mask, batch.depth_gt, depth_net)
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        log(f"pretrain-depth epoch {epoch + 1}/{config.pretrain_epochs} "
            f"loss {np.mean(epoch_losses):.5f}")
    return depth_net


def generator_objective(bundle: nets.ModelBundle, live: TensorBatch, spoof: TensorBatch,
                        weights: Sequence[float]) -> losses.LossBundle:
    """The full generator objective on one balanced batch pair.

    Builds A′/B′ reconstructions and the liveness-swapped A_b/B_a (shortcuts
    travel with the content-providing image), then combines image/latent
    reconstruction, LBP, depth, and adversarial terms. Shared by the
    training step and the finite-difference gradient check.
    """
    enc, dec = bundle.encoder, bundle.decoder
    z_a, z_b = enc(live.images), enc(spoof.images)
    a_rec = dec(z_a.content, z_a.liveness, z_a.shortcuts)
    b_rec = dec(z_b.content, z_b.liveness, z_b.shortcuts)
    a_b = dec(z_a.content, z_b.liveness, z_a.shortcuts)  # spoof version of A
    b_a = dec(z_b.content, z_a.liveness, z_b.shortcuts)  # live version of B

    img_rec = 0.5 * (losses.l1_mean(a_rec, live.images) + losses.l1_mean(b_rec, spoof.images))

    z_ab, z_ba = enc(a_b), enc(b_a)
    latent_rec = losses.latent_rec_loss([
        (torch.cat([z_a.content, z_b.liveness], dim=1), z_ab.concat),
        (torch.cat([z_b.content, z_a.liveness], dim=1), z_ba.concat),
    ])

    lbp = losses.lbp_loss(
        torch.cat([z_a.liveness, z_b.liveness]),
        torch.cat([live.live_mask, spoof.live_mask]),
        torch.cat([live.lbp_gt, spoof.lbp_gt]),
        bundle.lbp_net,
    )

    n_a, n_b = live.images.shape[0], spoof.images.shape[0]
    gen_images = torch.cat([a_rec, b_rec, a_b, b_a])
    # targets per image: A′ → dep_A, B′ → 0, A_b → 0, B_a → face depth of B
    depth_mask = torch.cat([
        torch.ones(n_a, dtype=torch.bool), torch.zeros(n_b, dtype=torch.bool),
        torch.zeros(n_a, dtype=torch.bool), torch.ones(n_b, dtype=torch.bool),
    ])
    depth_targets = torch.cat([live.face_depth, spoof.depth_gt,
                               torch.zeros_like(live.face_depth), spoof.face_depth])
    depth = losses.depth_loss(gen_images, depth_mask, depth_targets, bundle.depth_net)

    gen_adv = losses.gen_adv_loss(gen_images, bundle.disc1, bundle.disc2)
    return losses.total_gen_loss(img_rec, latent_rec, lbp, depth, gen_adv, weights)


def discriminator_step(bundle: nets.ModelBundle, optimizer: torch.optim.Optimizer,
                       live: TensorBatch, spoof: TensorBatch) -> float:
    """Step 1: update disc1/disc2 on real {A,B} vs generated {A′,B′,A_b,B_a}."""
    with torch.no_grad():
        z_a = bundle.encoder(live.images)
        z_b = bundle.encoder(spoof.images)
        gen_images = torch.cat([
            bundle.decoder(z_a.content, z_a.liveness, z_a.shortcuts),
            bundle.decoder(z_b.content, z_b.liveness, z_b.shortcuts),
            bundle.decoder(z_a.content, z_b.liveness, z_a.shortcuts),
            bundle.decoder(z_b.content, z_a.liveness, z_b.shortcuts),
        ])
    real_images = torch.cat([live.images, spoof.images])
    optimizer.zero_grad()
    loss = losses.disc_loss(real_images, gen_images, bundle.disc1, bundle.disc2)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def generator_step(bundle: nets.ModelBundle, optimizer: torch.optim.Optimizer,
                   live: TensorBatch, spoof: TensorBatch,
                   weights: Sequence[float]) -> losses.LossBundle:
    """Step 2: update encoder+decoder+lbp_net under the full objective."""
    disc_params = nets.discriminator_parameters(bundle)
    for p in disc_params:
        p.requires_grad_(False)
    try:
        optimizer.zero_grad()
        bundle_losses = generator_objective(bundle, live, spoof, weights)
        bundle_losses.total.backward()
        optimizer.step()
    finally:
        for p in disc_params:
            p.requires_grad_(True)
    return bundle_losses


def train_step(bundle: nets.ModelBundle, optimizers: dict[str, torch.optim.Optimizer],
               live_samples: Sequence[ImageSample], spoof_samples: Sequence[ImageSample],
               weights: Sequence[float]) -> tuple[float, losses.LossBundle]:
    live, spoof = batch_tensors(live_samples), batch_tensors(spoof_samples)
    d_loss = discriminator_step(bundle, optimizers["disc"], live, spoof)
    g_bundle = generator_step(bundle, optimizers["gen"], live, spoof, weights)
    return d_loss, g_bundle


def train(samples: Sequence[ImageSample], config: TrainConfig,
          net_config: nets.NetConfig | None = None, *,
          models: nets.ModelBundle | None = None,
          depth_net: nets.DepthNet | None = None,
          log_path: Path | None = None, checkpoint_path: Path | None = None,
          resume: bool = False, run_config: dict | None = None,
          log: Callable[[str], None] = print) -> tuple[nets.ModelBundle, list[dict]]:
    """Pretrain depth (unless given), then run the alternating loop.

    Writes the loss log CSV row per step and periodic checkpoints; resuming
    restores models+optimizers from ``checkpoint_path`` and appends to the
    existing log.
    """
    torch.set_num_threads(1)  # reproducibility contract is single-threaded
    net_config = net_config or nets.NetConfig(resolution=config.resolution)
    if net_config.resolution != config.resolution:
        raise ValueError(f"net resolution {net_config.resolution} != "
                         f"train resolution {config.resolution}")

    start_step = 0
    if resume:
        if checkpoint_path is None:
            raise ValueError("resume requires a checkpoint path")
        bundle, payload = nets.load_checkpoint(checkpoint_path)
        start_step = int(payload["step"])
        optimizers = build_optimizers(bundle, config)
        for name, opt in optimizers.items():
            if name in payload["optimizers"]:
                opt.load_state_dict(payload["optimizers"][name])
    else:
        bundle = models if models is not None else nets.build_models(net_config, seed=config.seed)
        if depth_net is None:
            log(f"pretraining depth net for {config.pretrain_epochs} epochs")
            pretrain_depth(samples, config, net_config, depth_net=bundle.depth_net, log=log)
        else:
            bundle.depth_net = depth_net
        optimizers = build_optimizers(bundle, config)
    freeze_depth(bundle.depth_net)

    half = config.batch_size // 2
    n_live = sum(1 for s in samples if s.label == "live")
    n_spoof = len(samples) - n_live
    batches_per_epoch = min(n_live, n_spoof) // half
    if batches_per_epoch == 0:
        raise ValueError(f"need at least {half} samples per class, "
                         f"got {n_live} live / {n_spoof} spoof")

    log_file = None
    if log_path is not None:
        fresh = not (resume and Path(log_path).exists())
        log_file = open(log_path, "a" if not fresh else "w")
        if fresh:
            log_file.write(",".join(LOG_COLUMNS) + "\n")

    nets.set_train(bundle)
    bundle.depth_net.eval()
    history: list[dict] = []
    step = start_step
    try:
        while step < config.steps:
            epoch = step // batches_per_epoch
            offset = step % batches_per_epoch
            epoch_batches = list(balanced_batches(samples, config.batch_size,
                                                  seed=[config.seed, _MAIN_STREAM, epoch]))
            for live_b, spoof_b in epoch_batches[offset:]:
                if step >= config.steps:
                    break
                d_loss, g_bundle = train_step(bundle, optimizers, live_b, spoof_b,
                                              config.loss_weights)
                step += 1
                row = {"step": step, **g_bundle.scalars()}
                row["disc"] = d_loss
                history.append(row)
                values = [row[c] for c in LOG_COLUMNS]
                if not all(np.isfinite(v) for v in values):
                    if checkpoint_path is not None:
                        snap = Path(checkpoint_path).with_suffix(".diagnostic.pt")
                        nets.save_checkpoint(snap, bundle, optimizers, step, run_config)
                    raise NumericError(f"non-finite loss at step {step}: {row}")
                if log_file is not None:
                    log_file.write(",".join(repr(v) if isinstance(v, float) else str(v)
                                            for v in values) + "\n")
                    log_file.flush()
                if step % 50 == 0 or step == config.steps:
                    log(f"step {step}/{config.steps} total {row['total']:.4f} "
                        f"disc {row['disc']:.4f}")
                if checkpoint_path is not None and (
                        step % config.checkpoint_interval == 0 or step == config.steps):
                    nets.save_checkpoint(checkpoint_path, bundle, optimizers, step, run_config)
    finally:
        if log_file is not None:
            log_file.close()
    if checkpoint_path is not None and step > start_step:
        nets.save_checkpoint(checkpoint_path, bundle, optimizers, step, run_config)
    return bundle, history
