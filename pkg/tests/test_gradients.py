"""Analytic-vs-finite-difference verification of every training objective,
on an 8x8-image float64 toy configuration."""

import pytest
import torch

from turbo_i2i.adversarial import Discriminator, gan_loss_d, gan_loss_g
from turbo_i2i.objectives import UnpairedBatch, diversity_loss, paired_objective, unpaired_objective
from turbo_i2i.perceptual import FeatureNet
from turbo_i2i.report import LossWeights

from .gradcheck import check_gradients, perturbed_double_model


@pytest.fixture(scope="module")
def setup():
    model = perturbed_double_model()
    net = FeatureNet(seed=0, dtype=torch.float64)
    d_x = Discriminator(net, seed=11).double()
    d_y = Discriminator(net, seed=12).double()
    gen = torch.Generator().manual_seed(6)
    x = torch.rand(2, 3, 8, 8, generator=gen, dtype=torch.float64) * 2 - 1
    y = torch.rand(2, 3, 8, 8, generator=gen, dtype=torch.float64) * 2 - 1
    z = torch.randn(2, 4, 1, 1, generator=gen, dtype=torch.float64)
    params = [p for p in model.adapter_parameters() if p.requires_grad]
    return model, net, d_x, d_y, x, y, z, params


def test_unpaired_objective_gradients(setup):
    model, net, d_x, d_y, x, y, _, params = setup
    batch = UnpairedBatch(x, y, "day", "night")
    g = lambda img, code: model(img, code)
    worst = check_gradients(
        lambda: unpaired_objective(g, d_x, d_y, batch, LossWeights(), net).total_tensor,
        params, n_probes=16, seed=1)
    assert worst < 1e-3


def test_paired_objective_gradients(setup):
    model, net, _, d_y, x, y, _, params = setup
    worst = check_gradients(
        lambda: paired_objective(model, d_y, x, y, "night", LossWeights.paired(), net).total_tensor,
        params, n_probes=16, seed=2)
    assert worst < 1e-3


@pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
def test_diversity_loss_gradients(setup, gamma):
    model, net, _, _, x, y, z, params = setup
    g = lambda xx, zz, gg: model(xx, "night", z=zz, gamma=gg)
    worst = check_gradients(
        lambda: diversity_loss(g, x, y, z, gamma, LossWeights.paired(), net),
        params, n_probes=16, seed=3)
    assert worst < 1e-3


def test_gan_loss_g_gradients_wrt_generator(setup):
    model, net, _, d_y, x, _, _, params = setup
    worst = check_gradients(
        lambda: gan_loss_g(d_y, model(x, "night")).total_tensor,
        params, n_probes=16, seed=4)
    assert worst < 1e-3


def test_gan_loss_d_gradients_wrt_heads(setup):
    model, net, _, d_y, x, y, _, _ = setup
    with torch.no_grad():
        fake = model(x, "night")
    heads = [p for p in d_y.head_parameters() if p.requires_grad]
    worst = check_gradients(
        lambda: gan_loss_d(d_y, y, fake).total_tensor,
        heads, n_probes=16, seed=5)
    assert worst < 1e-3


def test_diversity_gamma_zero_contributes_no_gradient(setup):
    model, net, _, _, x, y, z, params = setup
    g = lambda xx, zz, gg: model(xx, "night", z=zz, gamma=gg)
    val = diversity_loss(g, x, y, z, 0.0, LossWeights.paired(), net)
    assert float(val) == 0.0
    # no graph at gamma=0: the term cannot push any gradient into the model
    assert val.grad_fn is None
    combined = val + 0.0 * params[0].sum()  # embed in a larger objective
    grads = torch.autograd.grad(combined, params, allow_unused=True)
    norm = sum(0.0 if gr is None else float(gr.norm()) for gr in grads)
    assert norm < 1e-9
