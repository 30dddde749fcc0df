"""Checkpoint directory format.

A checkpoint is a directory with one flat little-endian float32 binary per
named tensor under ``tensors/``, plus ``manifest.json`` recording tensor
names, shapes, the frozen/trainable partition, the model config and its
hash.  The same container stores generator states, discriminator heads and
Fréchet feature statistics.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch

from .adversarial import Discriminator
from .errors import ValidationError
from .generator import ModelConfig, OneStepTranslator, _is_adapter_name
from .perceptual import FeatureNet, FeatureStats

FORMAT_VERSION = 1


def _tensor_filename(name: str) -> str:
    return name.replace("/", "_") + ".bin"


def _write_tensors(path: Path, tensors: dict[str, torch.Tensor]) -> dict:
    tdir = path / "tensors"
    tdir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, t in sorted(tensors.items()):
        arr = t.detach().cpu().to(torch.float32).numpy()
        fname = _tensor_filename(name)
        arr.astype("<f4").tofile(tdir / fname)
        entries[name] = {"shape": list(arr.shape), "dtype": "float32", "file": f"tensors/{fname}"}
    return entries


def _read_tensor(path: Path, entry: dict) -> torch.Tensor:
    arr = np.fromfile(path / entry["file"], dtype="<f4").reshape(entry["shape"])
    return torch.from_numpy(arr.copy())


def config_hash(config_dict: dict) -> str:
    return hashlib.sha256(json.dumps(config_dict, sort_keys=True).encode()).hexdigest()[:16]


def save_translator(model: OneStepTranslator, path, *, model_id: str = "model",
                    extra_meta: dict | None = None) -> Path:
    path = Path(path)
    tensors = {n: p for n, p in model.named_parameters()}
    entries = _write_tensors(path, tensors)
    for name, entry in entries.items():
        entry["role"] = "trainable" if _is_adapter_name(name) else "frozen"
    manifest = {
        "format": FORMAT_VERSION,
        "kind": "translator",
        "model_id": model_id,
        "pretrained": bool(model.pretrained),
        "config": model.config.to_dict(),
        "config_hash": config_hash(model.config.to_dict()),
        "tensors": entries,
    }
    if extra_meta:
        manifest["meta"] = extra_meta
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_translator(path) -> OneStepTranslator:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest.get("kind") != "translator":
        raise ValidationError(f"{path} is not a translator checkpoint")
    model = OneStepTranslator(ModelConfig.from_dict(manifest["config"]))
    with torch.no_grad():
        params = dict(model.named_parameters())
        for name, entry in manifest["tensors"].items():
            if name not in params:
                raise ValidationError(f"unknown tensor {name!r} in checkpoint")
            params[name].copy_(_read_tensor(path, entry))
    model.pretrained = bool(manifest.get("pretrained", False))
    return model


def load_manifest(path) -> dict:
    return json.loads((Path(path) / "manifest.json").read_text())


def save_discriminator(d: Discriminator, path, *, model_id: str = "discriminator") -> Path:
    path = Path(path)
    tensors = {n: p for n, p in d.heads.named_parameters(prefix="heads")}
    entries = _write_tensors(path, tensors)
    for entry in entries.values():
        entry["role"] = "trainable"
    manifest = {
        "format": FORMAT_VERSION,
        "kind": "discriminator",
        "model_id": model_id,
        "backbone_seed": d.backbone.seed,
        "tensors": entries,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_discriminator(path, backbone: FeatureNet) -> Discriminator:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest.get("kind") != "discriminator":
        raise ValidationError(f"{path} is not a discriminator checkpoint")
    if manifest["backbone_seed"] != backbone.seed:
        raise ValidationError(
            f"checkpoint expects backbone seed {manifest['backbone_seed']}, got {backbone.seed}")
    d = Discriminator(backbone)
    with torch.no_grad():
        params = dict(d.heads.named_parameters(prefix="heads"))
        for name, entry in manifest["tensors"].items():
            params[name].copy_(_read_tensor(path, entry))
    return d


def save_stats(stats: FeatureStats, path, *, feature_net_seed: int) -> Path:
    path = Path(path)
    entries = _write_tensors(path, {
        "mean": torch.from_numpy(stats.mean.astype(np.float32)),
        "cov": torch.from_numpy(stats.cov.astype(np.float32)),
    })
    manifest = {
        "format": FORMAT_VERSION,
        "kind": "feature_stats",
        "count": stats.count,
        "feature_net_seed": feature_net_seed,
        "tensors": entries,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_stats(path) -> tuple[FeatureStats, int]:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest.get("kind") != "feature_stats":
        raise ValidationError(f"{path} is not a feature-stats checkpoint")
    mean = _read_tensor(path, manifest["tensors"]["mean"]).double().numpy()
    cov = _read_tensor(path, manifest["tensors"]["cov"]).double().numpy()
    return FeatureStats(mean=mean, cov=cov, count=manifest["count"]), manifest["feature_net_seed"]
