import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from turbo_i2i.errors import NumericalError, ShapeError, ValidationError
from turbo_i2i.perceptual import (FeatureNet, FeatureStats, dino_struct_dist, fit_stats,
                                  frechet_distance, lpips_like)


def test_feature_net_seed_reproducible():
    a, b = FeatureNet(seed=9), FeatureNet(seed=9)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    c = FeatureNet(seed=10)
    assert any(not torch.equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()))


class TestLpips:
    def test_identical_is_zero(self, feature_net, rand_images):
        assert float(lpips_like(rand_images[0], rand_images[0], feature_net)) == 0.0

    def test_symmetric(self, feature_net, rand_images):
        x, y = rand_images[0], rand_images[1]
        assert abs(float(lpips_like(x, y, feature_net)) - float(lpips_like(y, x, feature_net))) < 1e-9

    def test_monotone_under_noise(self, feature_net, rand_images):
        x = rand_images[0]
        noise = torch.randn(x.shape, generator=torch.Generator().manual_seed(2))
        vals = [float(lpips_like(x, (x + s * noise).clamp(-1, 1), feature_net))
                for s in (0.05, 0.1, 0.2)]
        assert vals[0] < vals[1] < vals[2]

    def test_shape_mismatch(self, feature_net, rand_images):
        with pytest.raises(ShapeError):
            lpips_like(rand_images[0], rand_images[0][:, :32, :32], feature_net)

    def test_nonnegative(self, feature_net, rand_images):
        for a, b in zip(rand_images[:4], rand_images[4:8]):
            assert float(lpips_like(a, b, feature_net)) >= 0.0


class TestDinoStruct:
    def test_identical_is_zero(self, feature_net, rand_images):
        assert float(dino_struct_dist(rand_images[0], rand_images[0], feature_net)) == 0.0

    def test_grey_quadrant_positive(self, feature_net, rand_images):
        x = rand_images[0]
        q = x.clone()
        q[:, :32, :32] = 0.25
        assert float(dino_struct_dist(x, q, feature_net)) > 0.0

    def test_matches_loop_oracle_on_rotation(self, feature_net, rand_images):
        """Independent implementation: explicit double loop over token pairs."""
        from turbo_i2i.perceptual import contrast_normalize

        x = rand_images[0]
        y = torch.rot90(x, 2, dims=(1, 2))
        got = float(dino_struct_dist(x, y, feature_net))

        def sim_loop(img):
            f = feature_net(contrast_normalize(img))[-1][0].numpy()
            c, h, w = f.shape
            toks = f.reshape(c, h * w).T
            toks = toks / (np.linalg.norm(toks, axis=1, keepdims=True) + 1e-8)
            n = toks.shape[0]
            s = np.zeros((n, n))
            for i in range(n):
                for j in range(n):
                    s[i, j] = float(toks[i] @ toks[j])
            return s

        want = np.abs(sim_loop(x) - sim_loop(y)).mean() * 100.0
        assert abs(got - want) / want < 1e-6

    def test_finite(self, feature_net, rand_images):
        v = float(dino_struct_dist(rand_images[2], rand_images[3], feature_net))
        assert np.isfinite(v)


class TestFitStats:
    def test_copies_of_one_image_zero_cov(self, feature_net, rand_images):
        st_ = fit_stats([rand_images[0]] * 5, feature_net)
        assert np.abs(st_.cov).max() < 1e-10
        assert st_.count == 5

    def test_order_free(self, feature_net, rand_images):
        a = fit_stats(rand_images[:6], feature_net)
        b = fit_stats(list(reversed(rand_images[:6])), feature_net)
        assert np.allclose(a.mean, b.mean)
        assert np.allclose(a.cov, b.cov)

    def test_matches_two_pass_oracle(self, feature_net, rand_images):
        imgs = rand_images[:10]
        st_ = fit_stats(imgs, feature_net)
        feats = feature_net.pooled(torch.stack(imgs)).double().numpy()
        mu = feats.mean(axis=0)
        diff = feats - mu
        cov = diff.T @ diff / (len(imgs) - 1)
        assert np.abs(st_.mean - mu).max() < 1e-6
        assert np.abs(st_.cov - (cov + cov.T) / 2).max() < 1e-6

    def test_needs_two_images(self, feature_net, rand_images):
        with pytest.raises(ValidationError):
            fit_stats(rand_images[:1], feature_net)

    def test_cov_symmetric_psd(self, feature_net, rand_images):
        st_ = fit_stats(rand_images, feature_net)
        assert np.abs(st_.cov - st_.cov.T).max() < 1e-12
        assert np.linalg.eigvalsh(st_.cov).min() > -1e-8


class TestFrechet:
    def test_identical_stats_zero(self):
        a = FeatureStats(mean=np.array([0.3, -1.2]), cov=np.array([[2.0, 0.5], [0.5, 1.0]]), count=8)
        assert frechet_distance(a, a) < 1e-12

    def test_unit_mean_shift(self):
        a = FeatureStats(mean=np.zeros(2), cov=np.eye(2), count=10)
        b = FeatureStats(mean=np.array([1.0, 0.0]), cov=np.eye(2), count=10)
        assert abs(frechet_distance(a, b) - 1.0) < 1e-6

    def test_1d_variance_case(self):
        a = FeatureStats(mean=np.zeros(1), cov=np.array([[1.0]]), count=5)
        b = FeatureStats(mean=np.zeros(1), cov=np.array([[4.0]]), count=5)
        assert abs(frechet_distance(a, b) - 1.0) < 1e-6

    def test_dim_mismatch(self):
        a = FeatureStats(mean=np.zeros(2), cov=np.eye(2), count=4)
        b = FeatureStats(mean=np.zeros(3), cov=np.eye(3), count=4)
        with pytest.raises(ShapeError):
            frechet_distance(a, b)

    def test_non_psd_raises(self):
        a = FeatureStats(mean=np.zeros(2), cov=np.diag([1.0, -0.5]), count=4)
        b = FeatureStats(mean=np.zeros(2), cov=np.eye(2), count=4)
        with pytest.raises(NumericalError):
            frechet_distance(a, b)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_symmetric_property(self, seed):
        rng = np.random.default_rng(seed)
        d = 4
        ra = rng.normal(size=(d, d))
        rb = rng.normal(size=(d, d))
        a = FeatureStats(mean=rng.normal(size=d), cov=ra @ ra.T + 1e-6 * np.eye(d), count=6)
        b = FeatureStats(mean=rng.normal(size=d), cov=rb @ rb.T + 1e-6 * np.eye(d), count=6)
        ab, ba = frechet_distance(a, b), frechet_distance(b, a)
        assert abs(ab - ba) <= 1e-8 * max(1.0, abs(ab))
        assert ab >= 0.0
