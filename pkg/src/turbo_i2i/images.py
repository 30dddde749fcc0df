"""Image tensor conventions and validation.

Images are torch float tensors in [-1, 1], channel-first: (3, H, W) for a
single image or (B, 3, H, W) for a batch.  H and W must be multiples of the
total downsampling factor of the first-stage encoder (8).
"""

from __future__ import annotations

import io

import numpy as np
import torch
from PIL import Image

from .errors import ShapeError, ValidationError

DOWNSAMPLE_FACTOR = 8


def validate_image(img: torch.Tensor, *, name: str = "image") -> torch.Tensor:
    """Check dtype/shape/finiteness of an image tensor, return it unchanged."""
    if img.dim() not in (3, 4) or img.shape[-3] != 3:
        raise ShapeError(f"{name}: expected (3,H,W) or (B,3,H,W), got {tuple(img.shape)}")
    h, w = img.shape[-2], img.shape[-1]
    if h % DOWNSAMPLE_FACTOR or w % DOWNSAMPLE_FACTOR:
        raise ShapeError(f"{name}: H and W must be multiples of {DOWNSAMPLE_FACTOR}, got {h}x{w}")
    if not torch.isfinite(img).all():
        raise ValidationError(f"{name}: contains non-finite values")
    return img


def as_batch(img: torch.Tensor) -> torch.Tensor:
    return img if img.dim() == 4 else img.unsqueeze(0)


def to_uint8(img: torch.Tensor) -> np.ndarray:
    """(3,H,W) in [-1,1] -> (H,W,3) uint8."""
    arr = img.detach().clamp(-1, 1).permute(1, 2, 0).cpu().numpy()
    return np.round((arr + 1.0) * 127.5).astype(np.uint8)


def from_uint8(arr: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(H,W,3) uint8 -> (3,H,W) in [-1,1]."""
    t = torch.from_numpy(np.ascontiguousarray(arr).copy()).to(dtype) / 127.5 - 1.0
    return t.permute(2, 0, 1)


def save_png(img: torch.Tensor, path) -> None:
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def load_png(path, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return from_uint8(arr, dtype)


def png_bytes(img: torch.Tensor) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="PNG")
    return buf.getvalue()


def png_from_bytes(data: bytes, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"))
    return from_uint8(arr, dtype)


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    """Peak signal-to-noise ratio in dB over the [-1,1] range (peak 2.0)."""
    mse = (a.detach() - b.detach()).pow(2).mean().item()
    if mse == 0:
        return float("inf")
    return 10.0 * float(np.log10(4.0 / mse))
