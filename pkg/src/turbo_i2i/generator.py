"""One-step translation generator.

The network is a single end-to-end model built from three parts that share
one gamma-controlled adaptation scheme:

  * a first-stage image encoder (8x spatial compression, 4 latent channels)
    that also exposes four intermediate activations, one per stage;
  * a latent core conditioned on a learned per-domain embedding through
    feature-wise affine modulation;
  * a decoder that mirrors the encoder and receives the four encoder taps
    through 1x1 zero-initialized projections (skip connections).

Every weight-bearing layer keeps a frozen base tensor plus a low-rank (or,
for the core's first layer, dense) delta.  The effective weight is always
``base + gamma * delta``, skip projections and noise blending are scaled by
the same ``gamma``, so gamma=0 reproduces the unadapted backbone and gamma=1
is the fully adapted deterministic translator.

Adapter-branch conditioning (a trainable clone of the image encoder with
zero-conv residuals into the core, or a lightweight conv stack) is kept only
for ablations; the main path feeds the input image directly to the core.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ShapeError, ValidationError
from .images import DOWNSAMPLE_FACTOR, as_batch, validate_image

LATENT_CHANNELS = 4
NUM_SKIP_TAPS = 4
_GROUPS = 4
_NORM_EPS = 3e-2

BRANCH_KINDS = ("controlnet-style", "lightweight-adapter")
CONDITIONING_MODES = ("direct",) + BRANCH_KINDS


@dataclass(frozen=True)
class ModelConfig:
    domains: tuple[str, ...] = ("day", "night")
    base_channels: int = 12        # encoder/decoder width; stages use c, 2c, 2c, 4c
    core_channels: int = 24
    core_blocks: int = 2
    emb_dim: int = 64
    lora_rank: int = 8
    conditioning: str = "direct"
    use_skips: bool = True
    align_feature_dim: int = 64    # pooled perceptual feature size for the alignment head
    seed: int = 0

    def __post_init__(self):
        if self.conditioning not in CONDITIONING_MODES:
            raise ValidationError(f"unknown conditioning mode {self.conditioning!r}")
        if self.conditioning != "direct" and self.use_skips:
            raise ValidationError("adapter-branch conditioning does not support skip connections")
        if self.base_channels % _GROUPS or self.core_channels % _GROUPS:
            raise ValidationError(f"channel counts must be multiples of {_GROUPS}")
        if len(self.domains) < 2 or len(set(self.domains)) != len(self.domains):
            raise ValidationError("need at least two distinct domain names")
        if self.lora_rank < 1:
            raise ValidationError("lora_rank must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domains"] = list(self.domains)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["domains"] = tuple(d["domains"])
        return ModelConfig(**d)


@dataclass
class LoRAParams:
    """Low-rank delta for one layer: delta = scale * (up @ down)."""

    down: torch.Tensor  # (rank, fan_in)
    up: torch.Tensor    # (fan_out, rank)
    rank: int
    scale: float = 1.0


def merge_lora(theta0: torch.Tensor, delta: LoRAParams, gamma: float) -> torch.Tensor:
    """Blend frozen weights with a low-rank delta: theta0 + gamma*scale*(up@down).

    Pure function; neither input is mutated.  The delta product is reshaped
    to theta0's shape, so conv kernels work the same way as matrices.
    """
    if delta.up.shape[1] != delta.down.shape[0]:
        raise ShapeError(f"merge_lora: rank mismatch {tuple(delta.up.shape)} vs {tuple(delta.down.shape)}")
    full = delta.up @ delta.down
    if full.numel() != theta0.numel():
        raise ShapeError(f"merge_lora: delta covers {full.numel()} elements, weights have {theta0.numel()}")
    return theta0 + float(gamma) * delta.scale * full.view_as(theta0)


def _clamped_rank(rank: int, fan_out: int, fan_in: int) -> int:
    return max(1, min(rank, fan_out, fan_in))


class LoRAConv2d(nn.Module):
    """Conv2d with a frozen-able base weight and a zero-initialized low-rank delta."""

    def __init__(self, in_ch: int, out_ch: int, kernel_size: int, rank: int,
                 stride: int = 1, padding: int = 0):
        super().__init__()
        self.stride, self.padding = stride, padding
        self.weight = nn.Parameter(torch.empty(out_ch, in_ch, kernel_size, kernel_size))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        fan_in = in_ch * kernel_size * kernel_size
        self.rank = _clamped_rank(rank, out_ch, fan_in)
        self.lora_down = nn.Parameter(torch.empty(self.rank, fan_in))
        self.lora_up = nn.Parameter(torch.zeros(out_ch, self.rank))
        self.scale = 1.0

    def lora_params(self) -> LoRAParams:
        return LoRAParams(down=self.lora_down, up=self.lora_up, rank=self.rank, scale=self.scale)

    def forward(self, x: torch.Tensor, gamma: float = 1.0) -> torch.Tensor:
        w = merge_lora(self.weight, self.lora_params(), gamma)
        return F.conv2d(x, w, self.bias, stride=self.stride, padding=self.padding)


class LoRALinear(nn.Module):
    def __init__(self, in_f: int, out_f: int, rank: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(out_f, in_f))
        self.bias = nn.Parameter(torch.zeros(out_f))
        self.rank = _clamped_rank(rank, out_f, in_f)
        self.lora_down = nn.Parameter(torch.empty(self.rank, in_f))
        self.lora_up = nn.Parameter(torch.zeros(out_f, self.rank))
        self.scale = 1.0

    def lora_params(self) -> LoRAParams:
        return LoRAParams(down=self.lora_down, up=self.lora_up, rank=self.rank, scale=self.scale)

    def forward(self, x: torch.Tensor, gamma: float = 1.0) -> torch.Tensor:
        w = merge_lora(self.weight, self.lora_params(), gamma)
        return F.linear(x, w, self.bias)


class DeltaConv2d(nn.Module):
    """Conv2d whose adaptation is a dense, zero-initialized weight delta.

    Used for the core's first layer, which is retrained in full rather than
    through a low-rank update.
    """

    def __init__(self, in_ch: int, out_ch: int, kernel_size: int, padding: int = 0):
        super().__init__()
        self.padding = padding
        self.weight = nn.Parameter(torch.empty(out_ch, in_ch, kernel_size, kernel_size))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        self.weight_delta = nn.Parameter(torch.zeros_like(self.weight))
        self.bias_delta = nn.Parameter(torch.zeros_like(self.bias))

    def forward(self, x: torch.Tensor, gamma: float = 1.0) -> torch.Tensor:
        g = float(gamma)
        return F.conv2d(x, self.weight + g * self.weight_delta, self.bias + g * self.bias_delta,
                        padding=self.padding)


class ZeroConv2d(nn.Module):
    """1x1 conv initialized to all zeros: contributes nothing until trained."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(out_ch, in_ch, 1, 1))
        self.bias = nn.Parameter(torch.zeros(out_ch))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.conv2d(x, self.weight, self.bias)


class DomainTable(nn.Module):
    """Per-domain embedding: frozen base vectors plus gamma-scaled deltas."""

    def __init__(self, names: tuple[str, ...], emb_dim: int):
        super().__init__()
        self.names = tuple(names)
        self.table = nn.Parameter(torch.empty(len(names), emb_dim))
        self.table_delta = nn.Parameter(torch.zeros(len(names), emb_dim))

    def index(self, code) -> int:
        if isinstance(code, str):
            if code not in self.names:
                raise ValidationError(f"unknown domain {code!r}; known: {self.names}")
            return self.names.index(code)
        idx = int(code)
        if not 0 <= idx < len(self.names):
            raise ValidationError(f"domain index {idx} out of range")
        return idx

    def forward(self, code, batch: int, gamma: float = 1.0) -> torch.Tensor:
        idx = self.index(code)
        vec = self.table[idx] + float(gamma) * self.table_delta[idx]
        return vec.unsqueeze(0).expand(batch, -1)


class ImageEncoder(nn.Module):
    """Four-stage encoder: taps after each stage, then a 4-channel latent head."""

    def __init__(self, c: int, rank: int):
        super().__init__()
        chans = (c, 2 * c, 2 * c, 4 * c)
        self.tap_channels = chans
        self.stages = nn.ModuleList([
            LoRAConv2d(3, c, 3, rank, padding=1),
            LoRAConv2d(c, 2 * c, 3, rank, stride=2, padding=1),
            LoRAConv2d(2 * c, 2 * c, 3, rank, stride=2, padding=1),
            LoRAConv2d(2 * c, 4 * c, 3, rank, stride=2, padding=1),
        ])
        self.norms = nn.ModuleList([nn.GroupNorm(_GROUPS, ch, eps=_NORM_EPS) for ch in chans])
        self.to_latent = LoRAConv2d(4 * c, LATENT_CHANNELS, 3, rank, padding=1)
        # whitened latent: keeps the encoder output on the same scale as the
        # unit-variance noise maps it gets blended with
        self.latent_norm = nn.GroupNorm(1, LATENT_CHANNELS, eps=_NORM_EPS, affine=False)

    def forward(self, x: torch.Tensor, gamma: float = 1.0):
        taps = []
        h = x
        for conv, norm in zip(self.stages, self.norms):
            h = F.silu(norm(conv(h, gamma)))
            taps.append(h)
        return self.latent_norm(self.to_latent(h, gamma)), taps


class FilmResBlock(nn.Module):
    """Residual block modulated by the domain embedding (scale/shift per channel)."""

    def __init__(self, m: int, emb_dim: int, rank: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_GROUPS, m, eps=_NORM_EPS)
        self.film = LoRALinear(emb_dim, 2 * m, rank)
        self.conv1 = LoRAConv2d(m, m, 3, rank, padding=1)
        self.norm2 = nn.GroupNorm(_GROUPS, m, eps=_NORM_EPS)
        self.conv2 = LoRAConv2d(m, m, 3, rank, padding=1)

    def forward(self, h: torch.Tensor, emb: torch.Tensor, gamma: float = 1.0) -> torch.Tensor:
        scale, shift = self.film(emb, gamma).chunk(2, dim=1)
        y = self.norm1(h) * (1 + scale[:, :, None, None]) + shift[:, :, None, None]
        y = self.conv1(F.silu(y), gamma)
        y = self.conv2(F.silu(self.norm2(y)), gamma)
        return h + y


class LatentCore(nn.Module):
    """Domain-conditional latent-to-latent network (the one-step generator core)."""

    def __init__(self, m: int, emb_dim: int, blocks: int, rank: int):
        super().__init__()
        self.first = DeltaConv2d(LATENT_CHANNELS, m, 3, padding=1)
        self.blocks = nn.ModuleList([FilmResBlock(m, emb_dim, rank) for _ in range(blocks)])
        self.out_norm = nn.GroupNorm(_GROUPS, m, eps=_NORM_EPS)
        self.out_conv = LoRAConv2d(m, LATENT_CHANNELS, 3, rank, padding=1)

    def forward(self, z: torch.Tensor, emb: torch.Tensor, gamma: float = 1.0,
                residuals: list[torch.Tensor] | None = None) -> torch.Tensor:
        h = self.first(z, gamma)
        if residuals is not None:
            h = h + residuals[0]
        for i, blk in enumerate(self.blocks):
            h = blk(h, emb, gamma)
            if residuals is not None:
                h = h + residuals[i + 1]
        return self.out_conv(F.silu(self.out_norm(h)), gamma)


class ImageDecoder(nn.Module):
    """Mirror of the encoder with optional zero-conv skip injections.

    Skip terms are added post-activation and pre-scaled by gamma, so each
    injection is exactly linear in gamma for frozen tap features.
    """

    def __init__(self, c: int, rank: int, tap_channels: tuple[int, ...], use_skips: bool):
        super().__init__()
        self.use_skips = use_skips
        self.from_latent = LoRAConv2d(LATENT_CHANNELS, 4 * c, 3, rank, padding=1)
        self.ups = nn.ModuleList([
            LoRAConv2d(4 * c, 2 * c, 3, rank, padding=1),
            LoRAConv2d(2 * c, c, 3, rank, padding=1),
            LoRAConv2d(c, c, 3, rank, padding=1),
        ])
        stage_chans = (4 * c, 2 * c, c, c)
        self.norms = nn.ModuleList([nn.GroupNorm(_GROUPS, ch, eps=_NORM_EPS) for ch in stage_chans])
        self.head = LoRAConv2d(c, 3, 3, rank, padding=1)
        if use_skips:
            # skip_proj[i] maps encoder tap i (deepest first: tap3..tap0)
            tap_in = (tap_channels[3], tap_channels[2], tap_channels[1], tap_channels[0])
            self.skip_proj = nn.ModuleList(
                [ZeroConv2d(tin, sc) for tin, sc in zip(tap_in, stage_chans)])

    def skip_terms(self, taps: list[torch.Tensor], gamma: float) -> list[torch.Tensor]:
        """The four additive skip contributions, deepest injection first."""
        if not self.use_skips:
            return []
        ordered = (taps[3], taps[2], taps[1], taps[0])
        return [float(gamma) * proj(t) for proj, t in zip(self.skip_proj, ordered)]

    def forward(self, z: torch.Tensor, taps: list[torch.Tensor] | None = None,
                gamma: float = 1.0) -> torch.Tensor:
        inject = self.skip_terms(taps, gamma) if (self.use_skips and taps is not None) else None
        h = F.silu(self.norms[0](self.from_latent(z, gamma)))
        if inject is not None:
            h = h + inject[0]
        for i, up in enumerate(self.ups):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = F.silu(self.norms[i + 1](up(h, gamma)))
            if inject is not None:
                h = h + inject[i + 1]
        return torch.tanh(self.head(h, gamma))


class ControlNetBranch(nn.Module):
    """Trainable clone of the image encoder feeding zero-conv residuals into the core.

    All conditioning information passes through the 8x-compressed bottleneck;
    there are no image-resolution shortcuts.
    """

    def __init__(self, c: int, core_m: int, injection_points: int):
        super().__init__()
        chans = (c, 2 * c, 2 * c, 4 * c)
        self.stages = nn.ModuleList([
            nn.Conv2d(3, c, 3, padding=1),
            nn.Conv2d(c, 2 * c, 3, stride=2, padding=1),
            nn.Conv2d(2 * c, 2 * c, 3, stride=2, padding=1),
            nn.Conv2d(2 * c, 4 * c, 3, stride=2, padding=1),
        ])
        self.norms = nn.ModuleList([nn.GroupNorm(_GROUPS, ch, eps=_NORM_EPS) for ch in chans])
        self.injectors = nn.ModuleList(
            [ZeroConv2d(4 * c, core_m) for _ in range(injection_points)])

    def clone_from(self, encoder: ImageEncoder) -> None:
        with torch.no_grad():
            for conv, src in zip(self.stages, encoder.stages):
                conv.weight.copy_(src.weight)
                conv.bias.copy_(src.bias)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        h = x
        for conv, norm in zip(self.stages, self.norms):
            h = F.silu(norm(conv(h)))
        return [inj(h) for inj in self.injectors]


class LightweightAdapterBranch(nn.Module):
    """Small randomly initialized conv stack with plain residual injections."""

    def __init__(self, core_m: int, injection_points: int, width: int = 16):
        super().__init__()
        self.stack = nn.Sequential(
            nn.Conv2d(3, width, 3, stride=2, padding=1), nn.SiLU(),
            nn.Conv2d(width, 2 * width, 3, stride=2, padding=1), nn.SiLU(),
            nn.Conv2d(2 * width, 2 * width, 3, stride=2, padding=1), nn.SiLU(),
        )
        self.injectors = nn.ModuleList(
            [nn.Conv2d(2 * width, core_m, 1) for _ in range(injection_points)])
        with torch.no_grad():
            for inj in self.injectors:
                inj.weight.mul_(0.25)
                inj.bias.zero_()

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        h = self.stack(x)
        return [inj(h) for inj in self.injectors]


_ADAPTER_MARKERS = ("lora_down", "lora_up", "delta", "skip_proj", "branch", "align_proj")


def _is_adapter_name(name: str) -> bool:
    return any(marker in name for marker in _ADAPTER_MARKERS)


class OneStepTranslator(nn.Module):
    """G(x, z, gamma, domain): the complete one-step translation network."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.pretrained = False
        c, m = config.base_channels, config.core_channels
        self.encoder = ImageEncoder(c, config.lora_rank)
        self.core = LatentCore(m, config.emb_dim, config.core_blocks, config.lora_rank)
        self.decoder = ImageDecoder(c, config.lora_rank, self.encoder.tap_channels, config.use_skips)
        self.domains = DomainTable(config.domains, config.emb_dim)
        self.align_proj = nn.Parameter(torch.empty(config.emb_dim, config.align_feature_dim))
        self.branch: nn.Module | None = None
        if config.conditioning == "controlnet-style":
            self.branch = ControlNetBranch(c, m, config.core_blocks + 1)
        elif config.conditioning == "lightweight-adapter":
            self.branch = LightweightAdapterBranch(m, config.core_blocks + 1)
        self._reset_parameters(config.seed)
        if isinstance(self.branch, ControlNetBranch):
            self.branch.clone_from(self.encoder)

    # ---------------------------------------------------------------- init

    def _reset_parameters(self, seed: int) -> None:
        """Deterministic init from a private generator; module construction
        order fixes the draw order, so identical (config, seed) gives
        bit-identical models regardless of global RNG state."""
        gen = torch.Generator().manual_seed(seed)

        def uniform_fan(w: torch.Tensor) -> None:
            fan_in = w.shape[1] * (w.shape[2] * w.shape[3] if w.dim() == 4 else 1)
            bound = (1.0 / fan_in) ** 0.5
            w.copy_((torch.rand(w.shape, generator=gen) * 2 - 1) * bound)

        with torch.no_grad():
            for p in self.parameters():
                p.zero_()
            for _, mod in sorted(self.named_modules(), key=lambda kv: kv[0]):
                if isinstance(mod, (LoRAConv2d, LoRALinear)):
                    uniform_fan(mod.weight)
                    mod.lora_down.copy_(torch.randn(mod.lora_down.shape, generator=gen) / mod.rank)
                elif isinstance(mod, DeltaConv2d):
                    uniform_fan(mod.weight)
                elif isinstance(mod, nn.Conv2d):
                    uniform_fan(mod.weight)
                elif isinstance(mod, nn.GroupNorm) and mod.affine:
                    mod.weight.fill_(1.0)
                elif isinstance(mod, DomainTable):
                    mod.table.copy_(torch.randn(mod.table.shape, generator=gen) * 0.2)
            self.align_proj.copy_(torch.randn(self.align_proj.shape, generator=gen) * 0.1)
            if isinstance(self.branch, LightweightAdapterBranch):
                for inj in self.branch.injectors:
                    inj.weight.mul_(0.25)

    # ----------------------------------------------------- parameter groups

    def adapter_parameters(self):
        return [p for n, p in self.named_parameters() if _is_adapter_name(n)]

    def backbone_parameters(self):
        return [p for n, p in self.named_parameters() if not _is_adapter_name(n)]

    def set_trainable(self, *, backbone: bool, adapters: bool) -> None:
        for n, p in self.named_parameters():
            p.requires_grad_(adapters if _is_adapter_name(n) else backbone)

    def backbone_checksum(self) -> str:
        h = hashlib.sha256()
        for n, p in sorted(self.named_parameters(), key=lambda kv: kv[0]):
            if not _is_adapter_name(n):
                h.update(n.encode())
                h.update(p.detach().cpu().numpy().tobytes())
        return h.hexdigest()

    # --------------------------------------------------------------- shapes

    def latent_shape(self, x: torch.Tensor) -> tuple[int, ...]:
        b = x.shape[0] if x.dim() == 4 else 1
        return (b, LATENT_CHANNELS, x.shape[-2] // DOWNSAMPLE_FACTOR, x.shape[-1] // DOWNSAMPLE_FACTOR)

    def sample_noise(self, x: torch.Tensor, generator: torch.Generator | None = None,
                     seed: int | None = None) -> torch.Tensor:
        if generator is None:
            generator = torch.Generator()
            generator.manual_seed(0 if seed is None else seed)
        return torch.randn(self.latent_shape(x), generator=generator,
                           dtype=next(self.parameters()).dtype)

    # -------------------------------------------------------------- forward

    def encode(self, x: torch.Tensor, gamma: float = 1.0):
        """First-stage encoding: (latent, [tap0..tap3]) with tap i at H/2^i."""
        validate_image(x, name="encode input")
        return self.encoder(as_batch(x), gamma)

    def forward(self, x: torch.Tensor, code, z: torch.Tensor | None = None,
                gamma: float = 1.0) -> torch.Tensor:
        xb = as_batch(x)
        emb = self.domains(code, xb.shape[0], gamma)
        if self.branch is not None:
            if z is None:
                raise ValidationError("adapter-branch conditioning requires a noise map z")
            residuals = self.branch(xb)
            lat = self.core(z, emb, gamma, residuals=residuals)
            out = self.decoder(lat, taps=None, gamma=gamma)
        else:
            enc_lat, taps = self.encoder(xb, gamma)
            g = float(gamma)
            if g == 1.0:
                mixed = enc_lat
            elif z is None:
                raise ValidationError("a noise map z is required when gamma < 1")
            else:
                mixed = g * enc_lat + (1.0 - g) * z
            lat = self.core(mixed, emb, gamma)
            out = self.decoder(lat, taps=taps if self.config.use_skips else None, gamma=gamma)
        return out if x.dim() == 4 else out.squeeze(0)

    def translate(self, x: torch.Tensor, code, z: torch.Tensor | None = None,
                  gamma: float = 1.0) -> torch.Tensor:
        """Validated translation: gamma in [0,1], z latent-shaped when needed."""
        validate_image(x, name="translate input")
        if not 0.0 <= float(gamma) <= 1.0:
            raise ValidationError(f"gamma must be in [0,1], got {gamma}")
        if z is None and (float(gamma) < 1.0 or self.branch is not None):
            raise ValidationError("a noise map z is required when gamma < 1 or with a branch model")
        if z is not None and tuple(z.shape) != self.latent_shape(x):
            raise ShapeError(f"noise map shape {tuple(z.shape)} != latent shape {self.latent_shape(x)}")
        with torch.no_grad():
            return self.forward(x, code, z=z, gamma=gamma)

    def backbone_forward(self, x: torch.Tensor, code, z: torch.Tensor | None = None,
                         gamma: float = 1.0) -> torch.Tensor:
        """Reference output of the unadapted backbone for the same inputs.

        Runs the direct path with all deltas and skips forced off while
        keeping the gamma blend of encoder output and noise.
        """
        xb = as_batch(x)
        emb = self.domains(code, xb.shape[0], gamma=0.0)
        enc_lat, _ = self.encoder(xb, gamma=0.0)
        g = float(gamma)
        if g == 1.0:
            mixed = enc_lat
        elif z is None:
            raise ValidationError("a noise map z is required when gamma < 1")
        else:
            mixed = g * enc_lat + (1.0 - g) * z
        lat = self.core(mixed, emb, gamma=0.0)
        out = self.decoder(lat, taps=None, gamma=0.0)
        return out if x.dim() == 4 else out.squeeze(0)

    def bound(self, code, z: torch.Tensor | None = None, gamma: float = 1.0):
        """A (x -> image) callable with domain, noise and gamma baked in."""
        def fn(x: torch.Tensor) -> torch.Tensor:
            return self.forward(x, code, z=z, gamma=gamma)
        return fn

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.config.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def forward_with_adapter_branch(model: OneStepTranslator, x: torch.Tensor, z: torch.Tensor,
                                code, branch_kind: str) -> torch.Tensor:
    """Run a branch-conditioned model; exists for the conditioning ablations."""
    if branch_kind not in BRANCH_KINDS:
        raise ValidationError(f"unknown branch kind {branch_kind!r}; expected one of {BRANCH_KINDS}")
    if model.config.conditioning != branch_kind:
        raise ValidationError(
            f"model was built with {model.config.conditioning!r} conditioning, not {branch_kind!r}")
    validate_image(x, name="branch input")
    return model(x, code, z=z)
