"""Composite training objectives, each returning an itemized LossReport.

All objectives are pure functions of the supplied model(s) and batches.
`G` is a callable mapping (image_batch, domain_code) -> image_batch in the
cycle/identity/unpaired objectives; for the paired objective it is the
translator itself (the alignment term needs its domain table and projection
head); for the diversity loss it is a callable (x, z, gamma) -> image with
the domain already bound.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, NamedTuple

import torch

from .adversarial import Discriminator, gan_loss_g
from .errors import ShapeError, ValidationError
from .perceptual import FeatureNet, lpips_like
from .report import LossReport, LossWeights


@lru_cache(maxsize=4)
def default_feature_net(seed: int = 0) -> FeatureNet:
    return FeatureNet(seed=seed)


def rec_distance(a: torch.Tensor, b: torch.Tensor, w: LossWeights,
                 net: FeatureNet | None = None) -> torch.Tensor:
    """Reconstruction distance: lambda_l1 * mean|a-b| + lambda_lpips * perceptual."""
    if a.shape != b.shape:
        raise ShapeError(f"rec_distance: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    net = net or default_feature_net()
    out = w.lambda_l1 * (a - b).abs().mean()
    if w.lambda_lpips > 0:
        out = out + w.lambda_lpips * lpips_like(a, b, net)
    return out


class UnpairedBatch(NamedTuple):
    x: torch.Tensor
    y: torch.Tensor
    code_x: object
    code_y: object


def _check_codes(code_x, code_y) -> None:
    if code_x == code_y:
        raise ValidationError(f"source and target domain codes must differ, both are {code_x!r}")


def cycle_loss(G: Callable, x_batch: torch.Tensor, y_batch: torch.Tensor,
               code_x, code_y, w: LossWeights, net: FeatureNet | None = None) -> LossReport:
    """Round-trip consistency: translating to the other domain and back
    must reproduce the original image, in both directions."""
    _check_codes(code_x, code_y)
    cyc_x = G(G(x_batch, code_y), code_x)
    cyc_y = G(G(y_batch, code_x), code_y)
    return LossReport({
        "cycle_x": rec_distance(cyc_x, x_batch, w, net),
        "cycle_y": rec_distance(cyc_y, y_batch, w, net),
    })


def identity_loss(G: Callable, x_batch: torch.Tensor, y_batch: torch.Tensor,
                  code_x, code_y, w: LossWeights, net: FeatureNet | None = None) -> LossReport:
    """Same-domain translation should be a no-op."""
    _check_codes(code_x, code_y)
    return LossReport({
        "idt_x": rec_distance(G(x_batch, code_x), x_batch, w, net),
        "idt_y": rec_distance(G(y_batch, code_y), y_batch, w, net),
    })


def unpaired_objective(G: Callable, d_x: Discriminator, d_y: Discriminator,
                       batch: UnpairedBatch, w: LossWeights,
                       net: FeatureNet | None = None) -> LossReport:
    """Full unpaired objective: cycle + lambda_idt * identity + lambda_gan * GAN.

    The report itemizes the three groups; translated batches are stashed in
    `report.extras` so a training step can reuse them for the discriminator
    update without extra forward passes.
    """
    if d_x is None or d_y is None:
        raise ValidationError("unpaired_objective needs discriminators for both domains")
    _check_codes(batch.code_x, batch.code_y)
    fake_y = G(batch.x, batch.code_y)
    fake_x = G(batch.y, batch.code_x)
    cyc_x = G(fake_y, batch.code_x)
    cyc_y = G(fake_x, batch.code_y)
    idt_x = G(batch.x, batch.code_x)
    idt_y = G(batch.y, batch.code_y)

    cycle = rec_distance(cyc_x, batch.x, w, net) + rec_distance(cyc_y, batch.y, w, net)
    idt = rec_distance(idt_x, batch.x, w, net) + rec_distance(idt_y, batch.y, w, net)
    gan = gan_loss_g(d_y, fake_y).total_tensor + gan_loss_g(d_x, fake_x).total_tensor

    report = LossReport(
        {"cycle": cycle, "idt": idt, "gan": gan},
        weights={"cycle": 1.0, "idt": w.lambda_idt, "gan": w.lambda_gan},
        meta={"loss_weights": w.to_dict()},
    )
    report.extras = {"fake_x": fake_x.detach(), "fake_y": fake_y.detach()}
    return report


def paired_objective(G, d_y: Discriminator, x_batch: torch.Tensor, y_batch: torch.Tensor,
                     code, w: LossWeights, net: FeatureNet | None = None) -> LossReport:
    """Paired objective: reconstruction + lambda_gan * GAN + lambda_clip * alignment.

    The alignment surrogate pushes the pooled perceptual features of the
    output (through the model's trainable projection) toward the target
    domain embedding, standing in for a text-image alignment model.
    """
    if x_batch.shape[0] != y_batch.shape[0]:
        raise ValidationError(
            f"paired_objective: got {x_batch.shape[0]} inputs vs {y_batch.shape[0]} targets")
    if x_batch.shape != y_batch.shape:
        raise ShapeError(f"paired shapes differ: {tuple(x_batch.shape)} vs {tuple(y_batch.shape)}")
    net = net or default_feature_net()
    out = G(x_batch, code)
    terms = {
        "rec": rec_distance(out, y_batch, w, net),
        "gan": gan_loss_g(d_y, out).total_tensor,
    }
    weights = {"rec": 1.0, "gan": w.lambda_gan}
    if w.lambda_clip > 0:
        pooled = net(out)[-1].mean(dim=(2, 3))
        proj = pooled @ G.align_proj.t()
        emb = G.domains(code, out.shape[0], gamma=1.0)
        cos = torch.nn.functional.cosine_similarity(proj, emb, dim=1)
        terms["clip"] = (1.0 - cos).mean()
        weights["clip"] = w.lambda_clip
    report = LossReport(terms, weights=weights, meta={"loss_weights": w.to_dict()})
    report.extras = {"fake_y": out.detach()}
    return report


def diversity_loss(G: Callable, x: torch.Tensor, y: torch.Tensor, z: torch.Tensor,
                   gamma: float, w: LossWeights, net: FeatureNet | None = None) -> torch.Tensor:
    """Gamma-scaled reconstruction of the gamma-blended output against y.

    At gamma=0 the reconstruction is not enforced at all: the value is an
    exact zero and no gradient flows.
    """
    g = float(gamma)
    if not 0.0 <= g <= 1.0:
        raise ValidationError(f"gamma must be in [0,1], got {gamma}")
    if g == 0.0:
        return torch.zeros((), dtype=x.dtype)
    return g * rec_distance(G(x, z, g), y, w, net)
