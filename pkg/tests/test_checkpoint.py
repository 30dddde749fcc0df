import json

import numpy as np
import pytest
import torch

from turbo_i2i import checkpoint as ckpt
from turbo_i2i.adversarial import Discriminator
from turbo_i2i.errors import ValidationError
from turbo_i2i.generator import ModelConfig, OneStepTranslator
from turbo_i2i.perceptual import FeatureNet, fit_stats


def test_translator_roundtrip_bitwise(tmp_path):
    model = OneStepTranslator(ModelConfig(seed=33))
    gen = torch.Generator().manual_seed(1)
    with torch.no_grad():
        for p in model.adapter_parameters():
            p.add_(0.1 * torch.randn(p.shape, generator=gen))
    model.pretrained = True
    ckpt.save_translator(model, tmp_path / "m", model_id="toy")
    loaded = ckpt.load_translator(tmp_path / "m")
    assert loaded.pretrained
    for (na, pa), (nb, pb) in zip(model.named_parameters(), loaded.named_parameters()):
        assert na == nb
        assert torch.equal(pa, pb)


def test_manifest_records_partition_and_hash(tmp_path):
    model = OneStepTranslator(ModelConfig(seed=33))
    ckpt.save_translator(model, tmp_path / "m")
    manifest = json.loads((tmp_path / "m" / "manifest.json").read_text())
    roles = {e["role"] for e in manifest["tensors"].values()}
    assert roles == {"frozen", "trainable"}
    assert manifest["tensors"]["decoder.skip_proj.0.weight"]["role"] == "trainable"
    assert manifest["tensors"]["core.first.weight"]["role"] == "frozen"
    assert manifest["config_hash"] == ckpt.config_hash(manifest["config"])
    assert manifest["format"] == 1


def test_tensor_files_are_flat_float32_le(tmp_path):
    model = OneStepTranslator(ModelConfig(seed=33))
    ckpt.save_translator(model, tmp_path / "m")
    manifest = json.loads((tmp_path / "m" / "manifest.json").read_text())
    name = "core.first.weight"
    entry = manifest["tensors"][name]
    raw = np.fromfile(tmp_path / "m" / entry["file"], dtype="<f4")
    assert raw.size == np.prod(entry["shape"])
    want = dict(model.named_parameters())[name].detach().numpy().ravel()
    assert np.array_equal(raw, want.astype("<f4"))


def test_wrong_kind_rejected(tmp_path):
    model = OneStepTranslator(ModelConfig(seed=33))
    ckpt.save_translator(model, tmp_path / "m")
    d = Discriminator(FeatureNet(seed=0), seed=0)
    ckpt.save_discriminator(d, tmp_path / "d")
    with pytest.raises(ValidationError):
        ckpt.load_translator(tmp_path / "d")


def test_discriminator_roundtrip(tmp_path):
    net = FeatureNet(seed=5)
    d = Discriminator(net, seed=7)
    ckpt.save_discriminator(d, tmp_path / "d")
    loaded = ckpt.load_discriminator(tmp_path / "d", net)
    for pa, pb in zip(d.head_parameters(), loaded.head_parameters()):
        assert torch.equal(pa, pb)
    with pytest.raises(ValidationError):
        ckpt.load_discriminator(tmp_path / "d", FeatureNet(seed=6))


def test_stats_roundtrip(tmp_path, feature_net, rand_images):
    stats = fit_stats(rand_images[:6], feature_net)
    ckpt.save_stats(stats, tmp_path / "s", feature_net_seed=feature_net.seed)
    loaded, seed = ckpt.load_stats(tmp_path / "s")
    assert seed == feature_net.seed
    assert loaded.count == stats.count
    assert np.abs(loaded.mean - stats.mean).max() < 1e-6
    assert np.abs(loaded.cov - stats.cov).max() < 1e-6
