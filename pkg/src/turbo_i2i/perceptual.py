"""Fixed-feature perceptual backbone and distribution/structure metrics.

A single seeded convolutional pyramid (`FeatureNet`) plays the role that
pretrained perceptual backbones usually play: it feeds the perceptual
distance (`lpips_like`), the structure distance (`dino_struct_dist`), the
Fréchet statistics (`fit_stats` / `frechet_distance`) and the discriminator
backbone.  The weights are drawn once from a recorded seed and never
trained, so every metric is a deterministic function of (inputs, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import NumericalError, ShapeError, ValidationError
from .images import as_batch, validate_image

# Stage widths of the pyramid; the last stage keeps stride 1 so its tokens
# retain an 8x downsampled grid for self-similarity maps.
_STAGE_CHANNELS = (16, 32, 64, 64)
_STAGE_STRIDES = (2, 2, 2, 1)

FID_RESIZE = 64  # images are resized here before Fréchet statistics


class FeatureNet(nn.Module):
    """Frozen 4-stage conv pyramid with seeded random weights.

    Identical seeds give bit-identical weights.  Per-stage channel weights
    (drawn from the same seed) reweight normalized feature differences in
    `lpips_like`, mirroring the per-channel calibration of learned
    perceptual metrics.
    """

    def __init__(self, seed: int = 0, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        convs = []
        in_ch = 3
        for out_ch, stride in zip(_STAGE_CHANNELS, _STAGE_STRIDES):
            conv = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1)
            fan_in = in_ch * 9
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * (2.0 / fan_in) ** 0.5)
                conv.bias.copy_(torch.randn(conv.bias.shape, generator=gen) * 0.05)
            convs.append(conv)
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        chan_weights = [0.5 + torch.rand(c, generator=gen) for c in _STAGE_CHANNELS]
        for i, w in enumerate(chan_weights):
            self.register_buffer(f"chan_weight_{i}", w)
        for p in self.parameters():
            p.requires_grad_(False)
        self.to(dtype)

    @property
    def feature_dim(self) -> int:
        return _STAGE_CHANNELS[-1]

    def stage_weights(self, i: int) -> torch.Tensor:
        return getattr(self, f"chan_weight_{i}")

    def forward(self, img: torch.Tensor) -> list[torch.Tensor]:
        """Return the four stage activations for a (B,3,H,W) batch."""
        h = img
        feats = []
        for conv in self.convs:
            h = F.silu(conv(h))  # smooth activation: keeps all metrics C^1 in their inputs
            feats.append(h)
        return feats

    def pooled(self, img: torch.Tensor) -> torch.Tensor:
        """Spatially pooled final-stage features, (B, feature_dim)."""
        return self.forward(img)[-1].mean(dim=(2, 3))


def _unit_normalize(feat: torch.Tensor, eps: float = 1e-3) -> torch.Tensor:
    # normalize each spatial location's channel vector to unit length
    norm = feat.pow(2).sum(dim=1, keepdim=True).sqrt()
    return feat / (norm + eps)


def lpips_like(x: torch.Tensor, y: torch.Tensor, net: FeatureNet) -> torch.Tensor:
    """Perceptual distance: weighted squared differences of unit-normalized
    stage features, averaged spatially and summed over stages.

    Symmetric, nonnegative, and exactly zero when the feature maps agree.
    Returns a scalar tensor (differentiable w.r.t. both images).
    """
    if x.shape != y.shape:
        raise ShapeError(f"lpips_like: shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    xb, yb = as_batch(x), as_batch(y)
    fx = net(xb)
    fy = net(yb)
    total = xb.new_zeros(())
    for i, (a, b) in enumerate(zip(fx, fy)):
        w = net.stage_weights(i).to(a.dtype).view(1, -1, 1, 1)
        d = (_unit_normalize(a) - _unit_normalize(b)).pow(2) * w
        total = total + d.sum(dim=1).mean()
    return total


def self_similarity(tokens: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Cosine-similarity matrix of spatial tokens, (B, N, N) from (B, C, H, W)."""
    b, c, h, w = tokens.shape
    t = tokens.reshape(b, c, h * w).transpose(1, 2)
    t = t / (t.norm(dim=2, keepdim=True) + eps)
    return t @ t.transpose(1, 2)


def contrast_normalize(img: torch.Tensor, eps: float = 0.05) -> torch.Tensor:
    """Per-image, per-channel standardization.

    Structure comparisons must not be dominated by global illumination
    (day vs night differ hugely in brightness while sharing geometry), so
    token extraction happens on contrast-normalized images.
    """
    b = as_batch(img)
    mean = b.mean(dim=(2, 3), keepdim=True)
    std = b.std(dim=(2, 3), keepdim=True)
    return (b - mean) / (std + eps)


def dino_struct_dist(x: torch.Tensor, y: torch.Tensor, net: FeatureNet) -> torch.Tensor:
    """Structure distance: mean absolute difference between the two images'
    final-stage token self-similarity matrices, reported x100.  Images are
    contrast-normalized first so the score tracks geometry, not appearance.
    """
    if x.shape != y.shape:
        raise ShapeError(f"dino_struct_dist: shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    sx = self_similarity(net(contrast_normalize(x))[-1])
    sy = self_similarity(net(contrast_normalize(y))[-1])
    return (sx - sy).abs().mean() * 100.0


@dataclass
class FeatureStats:
    """Gaussian moments of pooled features over an image set."""

    mean: np.ndarray  # (d,)
    cov: np.ndarray   # (d, d), symmetric PSD up to tolerance
    count: int

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def fit_stats(images, net: FeatureNet, batch_size: int = 32) -> FeatureStats:
    """Fit mean/covariance of pooled features over a set of images.

    Images are resized (bilinear, antialiased) to a fixed working size
    first so that statistics do not depend on the input resolution.
    Requires at least 2 images; covariance uses the n-1 denominator.
    """
    if isinstance(images, torch.Tensor) and images.dim() == 4:
        images = list(images)
    images = list(images)
    if len(images) < 2:
        raise ValidationError(f"fit_stats: need >= 2 images, got {len(images)}")
    feats = []
    with torch.no_grad():
        for i in range(0, len(images), batch_size):
            batch = torch.stack([validate_image(im) for im in images[i : i + batch_size]])
            if batch.shape[-1] != FID_RESIZE or batch.shape[-2] != FID_RESIZE:
                batch = F.interpolate(batch, size=(FID_RESIZE, FID_RESIZE), mode="bilinear", antialias=True)
            feats.append(net.pooled(batch).double().cpu().numpy())
    x = np.concatenate(feats, axis=0)
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False)
    cov = np.atleast_2d((cov + cov.T) / 2.0)
    return FeatureStats(mean=mean, cov=cov, count=x.shape[0])


def _sqrtm_psd(mat: np.ndarray, neg_tol: float) -> np.ndarray:
    """Square root of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues in [-neg_tol, 0) are clamped to zero; anything more negative
    means the input was not PSD to tolerance.
    """
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    if vals.min() < -neg_tol * max(1.0, abs(vals.max())):
        raise NumericalError(f"matrix sqrt: eigenvalue {vals.min():.3e} below -{neg_tol:.0e} tolerance")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: FeatureStats, b: FeatureStats, neg_tol: float = 1e-8) -> float:
    """Fréchet distance between two Gaussians:

        ||mu_a - mu_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^{1/2})

    The cross term is evaluated symmetrically as Tr((S C_b S)^{1/2}) with
    S = C_a^{1/2}, which matches Tr((C_a C_b)^{1/2}) and keeps the result
    symmetric in (a, b).
    """
    if a.dim != b.dim:
        raise ShapeError(f"frechet_distance: dim mismatch {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    sa = _sqrtm_psd(a.cov, neg_tol)
    cross = _sqrtm_psd(sa @ b.cov @ sa, neg_tol)
    val = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    return max(val, 0.0)


def fid_between(images_a, images_b, net: FeatureNet) -> float:
    """Convenience wrapper: Fréchet distance between two image sets."""
    return frechet_distance(fit_stats(images_a, net), fit_stats(images_b, net))
