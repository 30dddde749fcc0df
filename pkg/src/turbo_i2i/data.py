"""Synthetic two-domain scenes, edge/sketch extraction, and image ingestion.

Scenes are procedurally rendered layouts (gradient background plus randomly
placed circles, rectangles and triangles).  Each scene index renders twice
with pixel-identical geometry but per-domain illumination and noise grain,
giving an unpaired-translation benchmark whose ground-truth pairing is known
to the evaluator only.

Everything here is a pure function of (parameters, seed).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
from PIL import Image

from .errors import ValidationError
from .images import from_uint8, save_png

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Illumination:
    """Per-domain appearance: tone curve, albedo gain/bias per channel, noise grain.

    The tone exponent makes the two domains a *nonlinear* remapping of each
    other, so translation cannot be solved by a global channelwise affine.
    """

    gain: tuple[float, float, float]
    bias: tuple[float, float, float]
    tone: float = 1.0
    noise_sigma: float = 0.015

    @property
    def luminance(self) -> float:
        # mean luminance of a mid-grey (0.5) albedo under this illumination
        g = sum(self.gain) / 3.0
        b = sum(self.bias) / 3.0
        return 0.5**self.tone * g + b


DAY = Illumination(gain=(1.00, 0.97, 0.90), bias=(0.06, 0.05, 0.03), tone=0.85,
                   noise_sigma=0.012)
NIGHT = Illumination(gain=(0.30, 0.36, 0.62), bias=(-0.02, -0.01, 0.04), tone=2.4,
                     noise_sigma=0.028)


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    size: int = 64
    min_objects: int = 3
    max_objects: int = 6
    palette: tuple[Illumination, Illumination] = (DAY, NIGHT)

    @property
    def luminance_offset(self) -> float:
        return self.palette[0].luminance - self.palette[1].luminance


def _scene_geometry(spec: SceneSpec, index: int):
    """Deterministic layout for one scene: albedo field + object-id mask."""
    rng = np.random.default_rng([spec.seed, index])
    s = spec.size
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64) / s

    # background: tilted two-color gradient in albedo space
    top = rng.uniform(0.45, 0.75, size=3)
    bottom = rng.uniform(0.25, 0.55, size=3)
    tilt = rng.uniform(-0.3, 0.3)
    ramp = np.clip(yy + tilt * (xx - 0.5), 0.0, 1.0)[..., None]
    albedo = top * (1 - ramp) + bottom * ramp
    mask = np.zeros((s, s), dtype=np.uint8)

    n_obj = int(rng.integers(spec.min_objects, spec.max_objects + 1))
    for k in range(1, n_obj + 1):
        kind = rng.integers(0, 3)
        color = rng.uniform(0.2, 0.9, size=3)
        cy, cx = rng.uniform(0.15, 0.85, size=2)
        r = rng.uniform(0.08, 0.22)
        if kind == 0:  # circle
            inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2
        elif kind == 1:  # axis-aligned rectangle
            h, w = r, rng.uniform(0.08, 0.22)
            inside = (np.abs(yy - cy) <= h) & (np.abs(xx - cx) <= w)
        else:  # triangle via three half-plane tests
            ang = rng.uniform(0, 2 * np.pi, size=3) + np.array([0, 2.1, 4.2])
            px, py = cx + r * np.cos(ang), cy + r * np.sin(ang)
            inside = np.ones((s, s), dtype=bool)
            for i in range(3):
                j = (i + 1) % 3
                cross = (px[j] - px[i]) * (yy - py[i]) - (py[j] - py[i]) * (xx - px[i])
                ref = (px[(i + 2) % 3] - px[i]) * (py[j] - py[i])
                ref = (px[j] - px[i]) * (py[(i + 2) % 3] - py[i]) - ref
                inside &= (cross * -ref) <= 0
        albedo[inside] = color
        mask[inside] = k
    return albedo, mask


def render_scene(spec: SceneSpec, index: int, domain: int) -> tuple[torch.Tensor, np.ndarray]:
    """Render scene `index` under the given domain's illumination.

    Returns the image as a (3,H,W) tensor in [-1,1] and the geometry mask
    (object ids, 0 = background).  The mask depends only on (spec, index),
    never on the domain.
    """
    if domain not in (0, 1):
        raise ValidationError(f"domain must be 0 or 1, got {domain}")
    albedo, mask = _scene_geometry(spec, index)
    ill = spec.palette[domain]
    img = np.power(np.clip(albedo, 0.0, 1.0), ill.tone) * np.asarray(ill.gain) + np.asarray(ill.bias)
    noise_rng = np.random.default_rng([spec.seed, index, domain + 7])
    img = img + noise_rng.normal(0.0, ill.noise_sigma, size=img.shape)
    img8 = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    return from_uint8(img8), mask


def gen_two_domain_dataset(n: int, spec: SceneSpec):
    """n scenes rendered under both domains with identical geometry.

    Returns (X_set, Y_set, paired_map); paired_map[i] gives the index of
    X_set[i]'s counterpart in Y_set.  Unpaired training shuffles the two
    sets independently and never sees the map.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1 scenes, got {n}")
    xs, ys = [], []
    for i in range(n):
        xs.append(render_scene(spec, i, 0)[0])
        ys.append(render_scene(spec, i, 1)[0])
    return xs, ys, {i: i for i in range(n)}


def write_dataset(root, n: int, spec: SceneSpec, domains: tuple[str, str] = ("day", "night")) -> Path:
    """Materialize a dataset as <root>/<domain>/<index>.png plus a manifest."""
    root = Path(root)
    xs, ys, _ = gen_two_domain_dataset(n, spec)
    for name, images in zip(domains, (xs, ys)):
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(images):
            save_png(img, d / f"{i:05d}.png")
    manifest = {
        "domains": {name: n for name in domains},
        "seed": spec.seed,
        "size": spec.size,
        "luminance_offset": spec.luminance_offset,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return root


# --------------------------------------------------------------------- edges

@dataclass(frozen=True)
class EdgeConfig:
    """Threshold sampling ranges and morphology options for edge/sketch maps.

    Thresholds are relative to the maximum gradient magnitude; low < high is
    enforced per sample by resampling.
    """

    low_range: tuple[float, float] = (0.06, 0.16)
    high_range: tuple[float, float] = (0.22, 0.42)
    nms: bool = True
    morph_kernels: tuple[int, ...] = (1, 3)
    blur_sigma: float = 1.0


def _to_gray(img: torch.Tensor) -> np.ndarray:
    arr = img.detach().cpu().numpy()
    return (arr.mean(axis=0) + 1.0) / 2.0


def _gaussian_blur(a: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return a
    radius = max(1, int(3 * sigma))
    xs = np.arange(-radius, radius + 1)
    k = np.exp(-(xs**2) / (2 * sigma**2))
    k /= k.sum()
    pad = np.pad(a, radius, mode="edge")
    out = np.apply_along_axis(lambda r: np.convolve(r, k, mode="valid"), 0, pad)
    out = np.apply_along_axis(lambda r: np.convolve(r, k, mode="valid"), 1, out)
    return out


def _sobel(a: np.ndarray):
    p = np.pad(a, 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    return gx, gy


def _nms(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges: keep pixels that are maxima along the gradient direction."""
    angle = np.arctan2(gy, gx)
    sector = (np.round(angle / (np.pi / 4)).astype(int)) % 4
    p = np.pad(mag, 1, mode="constant")
    shifts = {
        0: (p[1:-1, 2:], p[1:-1, :-2]),      # horizontal gradient
        1: (p[2:, 2:], p[:-2, :-2]),         # diagonal
        2: (p[2:, 1:-1], p[:-2, 1:-1]),      # vertical
        3: (p[2:, :-2], p[:-2, 2:]),         # anti-diagonal
    }
    keep = np.zeros_like(mag, dtype=bool)
    for s, (n1, n2) in shifts.items():
        sel = sector == s
        keep |= sel & (mag >= n1) & (mag >= n2)
    return np.where(keep, mag, 0.0)


def _binary_dilate(a: np.ndarray) -> np.ndarray:
    p = np.pad(a, 1, mode="constant")
    out = p[1:-1, 1:-1].copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            out |= p[1 + dy : p.shape[0] - 1 + dy, 1 + dx : p.shape[1] - 1 + dx]
    return out


def _hysteresis(mag: np.ndarray, low: float, high: float) -> np.ndarray:
    strong = mag >= high
    weak = mag >= low
    result = strong.copy()
    while True:
        grown = _binary_dilate(result) & weak
        if (grown == result).all():
            return result
        result = grown


def _sample_thresholds(cfg: EdgeConfig, rng: np.random.Generator) -> tuple[float, float]:
    for _ in range(64):
        low = rng.uniform(*cfg.low_range)
        high = rng.uniform(*cfg.high_range)
        if low < high:
            return low, high
    return min(low, high) * 0.99, max(low, high)  # degenerate ranges: force an ordering


def extract_edges(img: torch.Tensor, cfg: EdgeConfig, seed: int) -> torch.Tensor:
    """Binary edge map via gradient magnitude + hysteresis thresholding.

    Thresholds are sampled per call from cfg's ranges, seeded; the same
    (img, cfg, seed) always yields the same map.
    """
    rng = np.random.default_rng([seed, 101])
    gray = _gaussian_blur(_to_gray(img), cfg.blur_sigma)
    gx, gy = _sobel(gray)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 1e-12:
        return torch.zeros(img.shape[-2], img.shape[-1])
    mag = mag / peak
    if cfg.nms:
        mag = _nms(mag, gx, gy)
    low, high = _sample_thresholds(cfg, rng)
    edges = _hysteresis(mag, low, high)
    return torch.from_numpy(edges.astype(np.float32))


def morphology(a: torch.Tensor, op: str, kernel: int) -> torch.Tensor:
    """Grayscale dilate/erode with a square kernel (kernel=1 is a no-op)."""
    if op not in ("dilate", "erode"):
        raise ValidationError(f"unknown morphology op {op!r}")
    if kernel <= 1:
        return a
    r = kernel // 2
    arr = a.detach().cpu().numpy()
    pad_val = 0.0 if op == "dilate" else 1.0
    p = np.pad(arr, r, mode="constant", constant_values=pad_val)
    stack = [
        p[r + dy : p.shape[0] - r + dy, r + dx : p.shape[1] - r + dx]
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
    ]
    out = np.max(stack, axis=0) if op == "dilate" else np.min(stack, axis=0)
    return torch.from_numpy(out.astype(np.float32))


def synth_sketch(img: torch.Tensor, cfg: EdgeConfig, seed: int) -> torch.Tensor:
    """Soft sketch map in [0,1]: blurred edge response, optional NMS, then a
    seeded random dilation/erosion (the augmentations used for sketch data)."""
    rng = np.random.default_rng([seed, 202])
    gray = _gaussian_blur(_to_gray(img), cfg.blur_sigma * 1.5)
    gx, gy = _sobel(gray)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 1e-12:
        return torch.zeros(img.shape[-2], img.shape[-1])
    mag = mag / peak
    if cfg.nms:
        mag = _nms(mag, gx, gy)
    low, _ = _sample_thresholds(cfg, rng)
    soft = np.where(mag >= low, mag, 0.0)
    sketch = torch.from_numpy(np.clip(soft, 0.0, 1.0).astype(np.float32))
    op = "dilate" if rng.uniform() < 0.75 else "erode"
    kernel = int(rng.choice(cfg.morph_kernels))
    return morphology(sketch, op, kernel)


def edge_image(edges: torch.Tensor) -> torch.Tensor:
    """Lift an (H,W) edge/sketch map in [0,1] to a 3-channel image in [-1,1]."""
    return edges.unsqueeze(0).repeat(3, 1, 1) * 2.0 - 1.0


# -------------------------------------------------------------------- ingest

def ingest(folder, train_mode: bool, load_size: int, crop_size: int,
           seed: int = 0) -> Iterator[torch.Tensor]:
    """Stream images from a folder of PNGs, mapped to [-1,1].

    Train mode resizes to load_size then takes a seeded random crop of
    crop_size; eval mode resizes straight to crop_size.  Unreadable files
    are skipped with a warning; an empty folder is an error.
    """
    folder = Path(folder)
    files = sorted(folder.glob("*.png"))
    if not files:
        raise ValidationError(f"no PNG images in {folder}")
    if train_mode and crop_size > load_size:
        raise ValidationError(f"crop_size {crop_size} exceeds load_size {load_size}")
    rng = np.random.default_rng(seed)
    for f in files:
        try:
            with Image.open(f) as im:
                im = im.convert("RGB")
                if train_mode:
                    im = im.resize((load_size, load_size), Image.BILINEAR)
                    top = int(rng.integers(0, load_size - crop_size + 1))
                    left = int(rng.integers(0, load_size - crop_size + 1))
                    im = im.crop((left, top, left + crop_size, top + crop_size))
                else:
                    im = im.resize((crop_size, crop_size), Image.BILINEAR)
                arr = np.asarray(im)
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable image %s: %s", f, exc)
            continue
        yield from_uint8(arr)


def load_folder(folder, size: int, train_mode: bool = False, load_size: int | None = None,
                seed: int = 0) -> list[torch.Tensor]:
    """Materialize `ingest` into a list (toy datasets fit in memory)."""
    load = load_size if load_size is not None else (size + size // 8 if train_mode else size)
    return list(ingest(folder, train_mode, load, size, seed))
