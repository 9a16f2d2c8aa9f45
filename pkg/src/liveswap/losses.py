"""Loss terms for the disentanglement objective.

All reconstruction-style norms reduce as per-element means so the weights are
resolution-independent. Adversarial probabilities are clamped by EPS inside
the logs and the log arithmetic runs in float64, keeping closed-form values
(e.g. the 4·ln2 balanced-discriminator point) exact to tight tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import torch
from torch import Tensor, nn

from .nets import Decoder, Encoder, real_probability

EPS = 1e-7

# λ1..λ4 multiply (img_rec, latent_rec, depth, lbp); the adversarial term is
# unweighted.
DEFAULT_WEIGHTS = (10.0, 1.0, 1.0, 2.0)


@dataclass
class LossBundle:
    """Named loss terms plus the weighted total. disc is absent (None) in the
    generator step; tensors keep the autograd graph for backward."""

    img_rec: Tensor
    latent_rec: Tensor
    lbp: Tensor
    depth: Tensor
    gen_adv: Tensor
    total: Tensor
    disc: Tensor | None = None

    def scalars(self) -> dict[str, float]:
        out = {name: float(getattr(self, name).detach())
               for name in ("img_rec", "latent_rec", "lbp", "depth", "gen_adv", "total")}
        out["disc"] = float(self.disc.detach()) if self.disc is not None else float("nan")
        return out


def l1_mean(a: Tensor, b: Tensor) -> Tensor:
    """Per-element mean absolute difference."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return (a - b).abs().mean()


def image_rec_loss(images: Tensor, encoder: Encoder, decoder: Decoder) -> Tensor:
    """Mean L1 between each image and its own-code reconstruction."""
    z = encoder(images)
    recon = decoder(z.content, z.liveness, z.shortcuts)
    return l1_mean(recon, images)


def latent_rec_loss(pairs: Sequence[tuple[Tensor, Tensor]]) -> Tensor:
    """Mean over swapped codes of L1 between the code and its re-encoding.

    Each pair is (original concat(C, L), re-encoded concat); shortcuts are
    excluded — they are decoder aids, not latent code.
    """
    if not pairs:
        raise ValueError("need at least one latent pair")
    terms = [l1_mean(reencoded, original) for original, reencoded in pairs]
    return torch.stack(terms).mean()


def lbp_loss(liveness_feats: Tensor, live_mask: Tensor, lbp_gts: Tensor,
             lbp_net: nn.Module) -> Tensor:
    """L1 of the estimated LBP map against gt (live) or the zero map (spoof)."""
    out = lbp_net(liveness_feats)[:, 0]
    target = torch.where(live_mask[:, None, None], lbp_gts, torch.zeros_like(lbp_gts))
    return l1_mean(out, target)


def depth_loss(images: Tensor, live_mask: Tensor, depth_gts: Tensor,
               depth_net: nn.Module) -> Tensor:
    """L1 of the frozen depth net's map against gt (live) or zero (spoof).

    Gradient flows into ``images`` (the generator) only; the caller keeps
    depth_net parameters requires_grad=False.
    """
    out = depth_net(images)[:, 0]
    target = torch.where(live_mask[:, None, None], depth_gts, torch.zeros_like(depth_gts))
    return l1_mean(out, target)


def _log_probs(disc: nn.Module, images: Tensor) -> Tensor:
    return real_probability(disc, images).double().clamp(EPS, 1.0 - EPS).log()


def _log_one_minus_probs(disc: nn.Module, images: Tensor) -> Tensor:
    p = real_probability(disc, images).double().clamp(EPS, 1.0 - EPS)
    return (1.0 - p).log()


def disc_loss(real_images: Tensor, gen_images: Tensor,
              disc1: nn.Module, disc2: nn.Module) -> Tensor:
    """Discriminator BCE over both scales; generated images are detached."""
    gen_images = gen_images.detach()
    loss = torch.zeros((), dtype=torch.float64)
    for disc in (disc1, disc2):
        loss = loss - _log_probs(disc, real_images).mean() \
                    - _log_one_minus_probs(disc, gen_images).mean()
    return loss


def gen_adv_loss(gen_images: Tensor, disc1: nn.Module, disc2: nn.Module) -> Tensor:
    """Generator adversarial term: −E log D1(G) − E log D2(G)."""
    loss = torch.zeros((), dtype=torch.float64)
    for disc in (disc1, disc2):
        loss = loss - _log_probs(disc, gen_images).mean()
    return loss


def total_gen_loss(img_rec: Tensor, latent_rec: Tensor, lbp: Tensor, depth: Tensor,
                   gen_adv: Tensor,
                   weights: Iterable[float] = DEFAULT_WEIGHTS) -> LossBundle:
    """Weighted sum: gen_adv + λ1·img_rec + λ2·latent_rec + λ3·depth + λ4·lbp."""
    w = tuple(float(v) for v in weights)
    if len(w) != 4:
        raise ValueError(f"need exactly four weights, got {len(w)}")
    if any(v < 0 for v in w):
        raise ValueError(f"weights must be nonnegative, got {w}")
    total = gen_adv + w[0] * img_rec + w[1] * latent_rec + w[2] * depth + w[3] * lbp
    return LossBundle(img_rec=img_rec, latent_rec=latent_rec, lbp=lbp, depth=depth,
                      gen_adv=gen_adv, total=total)
