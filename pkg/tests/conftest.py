import os

import pytest
import torch

from turbo_i2i.data import SceneSpec, gen_two_domain_dataset
from turbo_i2i.generator import ModelConfig, OneStepTranslator
from turbo_i2i.perceptual import FeatureNet
from turbo_i2i.trainer import TrainConfig, pretrain_backbone


def _env_steps(name: str, default: int) -> int:
    """Step counts for the desk-scale runs; overridable for quick dev loops
    (the committed defaults are the acceptance-scale settings)."""
    return int(os.environ.get(name, default))


ACCEPT_STEPS = _env_steps("TURBO_I2I_TEST_STEPS", 2000)
PRETRAIN_AE_STEPS = _env_steps("TURBO_I2I_TEST_AE_STEPS", 800)
PRETRAIN_GEN_STEPS = _env_steps("TURBO_I2I_TEST_GEN_STEPS", 1200)
PAIRED_STEPS = _env_steps("TURBO_I2I_TEST_PAIRED_STEPS", 2000)
DIVERSITY_STEPS = _env_steps("TURBO_I2I_TEST_DIVERSITY_STEPS", 600)


@pytest.fixture(scope="session")
def feature_net() -> FeatureNet:
    return FeatureNet(seed=0)


@pytest.fixture(scope="session")
def rand_images():
    gen = torch.Generator().manual_seed(42)
    return [torch.rand(3, 64, 64, generator=gen) * 2 - 1 for _ in range(12)]


@pytest.fixture()
def fresh_model() -> OneStepTranslator:
    return OneStepTranslator(ModelConfig(seed=3))


@pytest.fixture(scope="session")
def toy_sets():
    """Small synthetic two-domain set: 200 train + 24 eval scenes per domain."""
    xs, ys, paired = gen_two_domain_dataset(224, SceneSpec(seed=5))
    return {
        "train_x": xs[:200], "train_y": ys[:200],
        "eval_x": xs[200:], "eval_y": ys[200:],
        "paired_map": paired,
    }


@pytest.fixture(scope="session")
def accept_cfg() -> TrainConfig:
    return TrainConfig(steps=ACCEPT_STEPS, batch_size=4, lr=1e-4, seed=7, eval_every=500)


@pytest.fixture(scope="session")
def backbone(toy_sets, accept_cfg) -> OneStepTranslator:
    return pretrain_backbone((toy_sets["train_x"], toy_sets["train_y"]), accept_cfg,
                             ModelConfig(seed=7),
                             ae_steps=PRETRAIN_AE_STEPS, gen_steps=PRETRAIN_GEN_STEPS)


@pytest.fixture(scope="session")
def _quick_backbone() -> OneStepTranslator:
    """A structurally valid pretrained state for fast contract tests (the
    few steps make no claim about quality)."""
    from turbo_i2i.data import SceneSpec, gen_two_domain_dataset as gen

    xs, ys, _ = gen(8, SceneSpec(seed=30))
    cfg = TrainConfig(steps=4, batch_size=2, lr=1e-4, seed=30)
    return pretrain_backbone((xs, ys), cfg, ModelConfig(seed=30), ae_steps=4, gen_steps=4)


@pytest.fixture()
def backbone_clone(_quick_backbone):
    import copy

    def make() -> OneStepTranslator:
        return copy.deepcopy(_quick_backbone)

    return make
