import math

import pytest
import torch

from turbo_i2i.adversarial import LOGIT_CLAMP, Discriminator, d_score, gan_loss_d, gan_loss_g
from turbo_i2i.errors import ShapeError, ValidationError


@pytest.fixture()
def disc(feature_net):
    return Discriminator(feature_net, seed=1)


def _img(b=2, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(b, 3, 64, 64, generator=gen) * 2 - 1


class TestDScore:
    def test_zero_heads_zero_logits(self, disc):
        disc.zero_heads()
        logits = d_score(disc, _img())
        assert logits.abs().max() == 0.0

    def test_deterministic(self, disc):
        x = _img(seed=1)
        assert torch.equal(d_score(disc, x), d_score(disc, x))

    def test_nonfinite_rejected(self, disc):
        x = _img()
        x[0, 0, 0, 0] = float("inf")
        with pytest.raises(ValidationError):
            d_score(disc, x)

    def test_input_gradient_matches_fd(self, feature_net):
        from turbo_i2i.perceptual import FeatureNet
        net64 = FeatureNet(seed=0, dtype=torch.float64)
        d = Discriminator(net64, seed=1).double()
        x = (_img(b=1, seed=2).double()).requires_grad_(True)
        grad = torch.autograd.grad(d_score(d, x).mean(), x)[0]
        i = (0, 1, 9, 17)
        h = 1e-3
        xp, xm = x.detach().clone(), x.detach().clone()
        xp[i] += h
        xm[i] -= h
        fd = (d_score(d, xp).mean() - d_score(d, xm).mean()) / (2 * h)
        assert abs((grad[i] - fd) / fd) < 1e-3

    def test_frozen_backbone_gets_no_grads(self, disc):
        loss = d_score(disc, _img(seed=3)).mean()
        loss.backward()
        assert all(p.grad is None for p in disc.backbone.parameters())
        assert all(p.grad is not None for p in disc.head_parameters())


class TestGanLossD:
    def test_zero_logits_value(self, disc):
        disc.zero_heads()
        x = _img(seed=4)
        report = gan_loss_d(disc, x, x)
        assert abs(report.total - 2 * math.log(2)) < 1e-6

    def test_saturated_perfect_discriminator(self, feature_net):
        d = Discriminator(feature_net, seed=2)
        with torch.no_grad():
            for head in d.heads:
                head[-1].weight.zero_()
        real, fake = _img(seed=5), _img(seed=6)
        # force saturation: +inf-ish logits on real, -inf-ish on fake via bias flips
        with torch.no_grad():
            for head in d.heads:
                head[-1].bias.fill_(1000.0)
        loss_real_half = gan_loss_d(d, real, fake).terms["d_real"]
        with torch.no_grad():
            for head in d.heads:
                head[-1].bias.fill_(-1000.0)
        loss_fake_half = gan_loss_d(d, real, fake).terms["d_fake"]
        assert loss_real_half < 1e-9 and loss_fake_half < 1e-9

    def test_bounded_by_clamp(self, feature_net):
        d = Discriminator(feature_net, seed=2)
        with torch.no_grad():
            for head in d.heads:
                head[-1].weight.zero_()
                head[-1].bias.fill_(-1000.0)  # maximally wrong on real
        report = gan_loss_d(d, _img(seed=7), _img(seed=8))
        assert 0.0 <= report.total <= 2 * LOGIT_CLAMP

    def test_shape_mismatch(self, disc):
        with pytest.raises(ShapeError):
            gan_loss_d(disc, _img(), _img()[:, :, :32, :32])

    def test_fake_treated_as_constant(self, disc):
        fake = _img(seed=9).requires_grad_(True)
        report = gan_loss_d(disc, _img(seed=10), fake)
        report.total_tensor.backward()
        assert fake.grad is None or fake.grad.abs().max() == 0.0

    def test_head_gradient_matches_fd(self):
        from turbo_i2i.perceptual import FeatureNet
        net64 = FeatureNet(seed=0, dtype=torch.float64)
        d = Discriminator(net64, seed=3).double()
        real, fake = _img(seed=11).double(), _img(seed=12).double()
        heads = [p for p in d.head_parameters() if p.requires_grad]
        loss = gan_loss_d(d, real, fake).total_tensor
        grads = torch.autograd.grad(loss, heads)
        h = 1e-3
        probes = [(0, 5), (2, 0), (4, 31)]
        for pi, ei in probes:
            p = heads[pi]
            orig = p.data.flatten()[ei].item()
            p.data.flatten()[ei] = orig + h
            lp = gan_loss_d(d, real, fake).total
            p.data.flatten()[ei] = orig - h
            lm = gan_loss_d(d, real, fake).total
            p.data.flatten()[ei] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[pi].flatten()[ei].item()
            assert abs(fd - an) / max(abs(fd), abs(an), 1e-8) < 1e-3


class TestGanLossG:
    def test_zero_logits_value(self, disc):
        disc.zero_heads()
        assert abs(gan_loss_g(disc, _img(seed=13)).total - math.log(2)) < 1e-6

    def test_fooled_discriminator_near_zero(self, feature_net):
        d = Discriminator(feature_net, seed=4)
        with torch.no_grad():
            for head in d.heads:
                head[-1].weight.zero_()
                head[-1].bias.fill_(1000.0)
        assert gan_loss_g(d, _img(seed=14)).total < 1e-9

    def test_monotone_decreasing_in_logits(self):
        # single-patch toy: loss value at fixed logit grid
        vals = []
        for logit in (-2.0, -1.0, 0.0, 1.0, 2.0):
            t = torch.tensor([[logit]])
            clamped = t.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
            vals.append(float(torch.nn.functional.binary_cross_entropy_with_logits(
                clamped, torch.ones_like(clamped))))
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_updates_do_not_cross(self, disc, fresh_model):
        """One optimizer step on D heads leaves generator params untouched
        and vice versa."""
        x = _img(seed=15)
        g_before = fresh_model.backbone_checksum()
        fake = fresh_model(x, "night")
        opt_d = torch.optim.Adam(disc.head_parameters(), lr=1e-3)
        gan_loss_d(disc, x, fake.detach()).total_tensor.backward()
        opt_d.step()
        assert fresh_model.backbone_checksum() == g_before
        head_before = [p.detach().clone() for p in disc.head_parameters()]
        fresh_model.set_trainable(backbone=False, adapters=True)
        opt_g = torch.optim.Adam([p for p in fresh_model.adapter_parameters()], lr=1e-3)
        gan_loss_g(disc, fresh_model(x, "night")).total_tensor.backward()
        opt_g.step()
        assert all(torch.equal(a, b) for a, b in zip(head_before, disc.head_parameters()))
