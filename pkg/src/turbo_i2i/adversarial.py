"""Patch discriminators on frozen perceptual features, and both GAN loss sides.

The discriminator keeps its feature backbone (the shared seeded FeatureNet)
frozen and trains only small conv heads at three scales.  Losses are binary
cross-entropy on patch logits; the discriminator side treats fakes as
constants, the generator side uses the non-saturating form.  Logits are
clamped to +-LOGIT_CLAMP before the BCE for numerical safety.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeError, ValidationError
from .images import as_batch
from .perceptual import FeatureNet
from .report import LossReport

LOGIT_CLAMP = 30.0
_HEAD_STAGES = (1, 2, 3)  # backbone stages the heads read (0-indexed)


class Discriminator(nn.Module):
    """Frozen backbone + trainable multi-scale heads -> patch logit map.

    `forward` returns one (B, P) tensor of per-patch logits, the
    concatenation of the flattened per-scale maps.
    """

    def __init__(self, backbone: FeatureNet, hidden: int = 32, seed: int = 0):
        super().__init__()
        self.backbone = backbone
        stage_channels = [backbone.convs[i].out_channels for i in _HEAD_STAGES]
        self.heads = nn.ModuleList([
            nn.Sequential(
                nn.Conv2d(ch, hidden, 3, padding=1),
                nn.SiLU(),
                nn.Conv2d(hidden, 1, 1),
            )
            for ch in stage_channels
        ])
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for head in self.heads:
                for mod in head:
                    if isinstance(mod, nn.Conv2d):
                        fan_in = mod.weight.shape[1] * mod.weight.shape[2] * mod.weight.shape[3]
                        bound = (1.0 / fan_in) ** 0.5
                        mod.weight.copy_((torch.rand(mod.weight.shape, generator=gen) * 2 - 1) * bound)
                        mod.bias.zero_()

    def head_parameters(self):
        return list(self.heads.parameters())

    def zero_heads(self) -> None:
        """Zero all head weights (useful for calibration checks)."""
        with torch.no_grad():
            for p in self.heads.parameters():
                p.zero_()

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        feats = self.backbone(as_batch(img))
        maps = [head(feats[i]) for head, i in zip(self.heads, _HEAD_STAGES)]
        return torch.cat([m.flatten(1) for m in maps], dim=1)


def d_score(d: Discriminator, img: torch.Tensor) -> torch.Tensor:
    """Per-patch logits for an image batch; differentiable in heads and input."""
    if not torch.isfinite(img).all():
        raise ValidationError("d_score: non-finite input")
    return d(img)


def _bce(logits: torch.Tensor, target_real: bool) -> torch.Tensor:
    logits = logits.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
    target = torch.ones_like(logits) if target_real else torch.zeros_like(logits)
    return F.binary_cross_entropy_with_logits(logits, target)


def gan_loss_d(d: Discriminator, real: torch.Tensor, fake: torch.Tensor) -> LossReport:
    """Discriminator loss: -E[log sig(D(real))] - E[log(1 - sig(D(fake)))].

    The fake batch is detached, so no gradient reaches the generator.
    """
    if real.shape[-3:] != fake.shape[-3:]:
        raise ShapeError(f"gan_loss_d: shape mismatch {tuple(real.shape)} vs {tuple(fake.shape)}")
    loss_real = _bce(d_score(d, real), target_real=True)
    loss_fake = _bce(d_score(d, fake.detach()), target_real=False)
    return LossReport({"d_real": loss_real, "d_fake": loss_fake})


def gan_loss_g(d: Discriminator, fake: torch.Tensor) -> LossReport:
    """Non-saturating generator loss: -E[log sig(D(fake))]."""
    return LossReport({"gan_g": _bce(d_score(d, fake), target_real=True)})
