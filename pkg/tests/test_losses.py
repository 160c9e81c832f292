import math

import numpy as np
import pytest
import torch

from tiletex import losses
from tiletex.errors import ShapeMismatch
from tiletex.losses import (
    IdentityExtractor,
    LossWeights,
    RandomFeatureExtractor,
    adversarial_losses,
    gram_matrix,
    l1_loss,
    style_loss,
    total_loss,
)


def _rand(*shape, seed=0, dtype=torch.float32):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(*shape, generator=gen, dtype=dtype)


class TestL1:
    def test_identical(self):
        x = _rand(1, 3, 8, 8)
        assert l1_loss(x, x).item() == 0.0

    def test_constant_gap(self):
        a = torch.zeros(1, 3, 4, 4)
        b = torch.ones(1, 3, 4, 4)
        assert l1_loss(a, b).item() == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            l1_loss(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 4, 5))

    def test_matches_loop_oracle(self):
        a = _rand(1, 3, 6, 5, seed=1)
        b = _rand(1, 3, 6, 5, seed=2)
        acc = 0.0
        for idx in np.ndindex(*a.shape):
            acc += abs(a[idx].item() - b[idx].item())
        expected = acc / a.numel()
        assert l1_loss(a, b).item() == pytest.approx(expected, abs=1e-7)


class TestGram:
    def test_constant_closed_form(self):
        v = 0.7
        feats = torch.full((2, 5, 4), v)
        g = gram_matrix(feats)
        # every entry is v^2 * h * w / (h * w * C) = v^2 / C
        np.testing.assert_allclose(g.numpy(), v * v / 2, rtol=1e-6)

    def test_orthogonal_indicators_diagonal(self):
        feats = torch.zeros(2, 2, 2)
        feats[0, 0, :] = 1.0  # channel 0 active on row 0
        feats[1, 1, :] = 1.0  # channel 1 active on row 1
        g = gram_matrix(feats)
        assert g[0, 1].item() == 0.0 and g[1, 0].item() == 0.0
        assert g[0, 0].item() > 0 and g[1, 1].item() > 0

    def test_matches_triple_loop_oracle(self):
        feats = _rand(3, 4, 4, seed=3)
        c, h, w = feats.shape
        expected = np.zeros((c, c))
        for i in range(c):
            for j in range(c):
                for y in range(h):
                    for x in range(w):
                        expected[i, j] += feats[i, y, x].item() * feats[j, y, x].item()
        expected /= h * w * c
        np.testing.assert_allclose(gram_matrix(feats).numpy(), expected, atol=1e-6)

    def test_symmetric_psd(self):
        g = gram_matrix(_rand(4, 6, 6, seed=4)).numpy()
        np.testing.assert_allclose(g, g.T, atol=1e-7)
        assert np.linalg.eigvalsh(g).min() > -1e-7


class TestStyle:
    def test_zero_for_identical(self):
        img = _rand(1, 3, 8, 8, seed=5)
        value = style_loss([img], [img], RandomFeatureExtractor(seed=0))
        assert value.item() == pytest.approx(0.0, abs=1e-10)

    def test_identity_extractor_closed_form(self):
        v1, v2 = 0.4, 0.9
        a = torch.full((1, 3, 4, 4), v1)
        b = torch.full((1, 3, 4, 4), v2)
        value = style_loss([a], [b], IdentityExtractor())
        # gram of constant-v image is v^2/3 everywhere (3x3), so the squared
        # Frobenius gap is 9 * ((v1^2 - v2^2)/3)^2 = (v1^2 - v2^2)^2
        expected = (v1 ** 2 - v2 ** 2) ** 2
        assert value.item() == pytest.approx(expected, rel=1e-5)

    def test_symmetry_under_swap(self):
        a = _rand(1, 3, 8, 8, seed=6)
        b = _rand(1, 3, 8, 8, seed=7)
        ext = RandomFeatureExtractor(seed=1)
        v1 = style_loss([a], [b], ext).item()
        v2 = style_loss([b], [a], ext).item()
        assert v1 == pytest.approx(v2, rel=1e-6)


class TestAdversarial:
    def test_perfect_discriminator(self):
        real = torch.ones(1, 1, 4, 4)
        fake = torch.zeros(1, 1, 4, 4)
        d_loss, g_loss = adversarial_losses(real, fake)
        assert d_loss.item() == pytest.approx(0.0, abs=1e-6)
        assert g_loss.item() == pytest.approx(-math.log(1e-8), rel=1e-6)

    def test_half_scores(self):
        half = torch.full((1, 1, 4, 4), 0.5)
        d_loss, g_loss = adversarial_losses(half, half)
        assert d_loss.item() == pytest.approx(2 * math.log(2), rel=1e-6)
        assert g_loss.item() == pytest.approx(math.log(2), rel=1e-6)

    def test_matches_loop_oracle(self):
        real = _rand(1, 1, 5, 5, seed=8) * 0.98 + 0.01
        fake = _rand(1, 1, 5, 5, seed=9) * 0.98 + 0.01
        d_loss, g_loss = adversarial_losses(real, fake)
        d_acc = g_acc = 0.0
        n = real.numel()
        for idx in np.ndindex(*real.shape):
            d_acc += -math.log(real[idx].item()) - math.log(1 - fake[idx].item())
            g_acc += -math.log(fake[idx].item())
        assert d_loss.item() == pytest.approx(d_acc / n, abs=1e-6)
        assert g_loss.item() == pytest.approx(g_acc / n, abs=1e-6)


class TestTotal:
    def test_default_weights_composition(self):
        breakdown = total_loss(1.0, 1.0, 1.0, 1.0, LossWeights())
        assert breakdown.total == pytest.approx(22.0)
        assert breakdown.non_adversarial == pytest.approx(21.0)

    def test_all_zero_parts(self):
        breakdown = total_loss(0.0, 0.0, 0.0, 0.0, LossWeights())
        assert breakdown.total == 0.0 and breakdown.non_adversarial == 0.0

    def test_zero_weights(self):
        weights = LossWeights(0.0, 0.0, 0.0, 0.0)
        breakdown = total_loss(3.0, 5.0, 7.0, 9.0, weights)
        assert breakdown.total == 0.0

    @pytest.mark.parametrize(
        "part,lam",
        [("adv", 1.0), ("l1_albedo", 10.0), ("l1_normals", 10.0), ("style", 1.0)],
    )
    def test_linearity_in_each_part(self, part, lam):
        base = {"adv": 0.0, "l1_albedo": 0.0, "l1_normals": 0.0, "style": 0.0}
        lo = total_loss(**base, weights=LossWeights()).total
        base[part] = 2.5
        hi = total_loss(**base, weights=LossWeights()).total
        assert hi - lo == pytest.approx(lam * 2.5)


class _StubNet(torch.nn.Module):
    """Tiny two-conv net in float64 for finite-difference checks."""

    def __init__(self, seed=0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.c1 = torch.nn.Conv2d(3, 4, 3, padding=1).double()
        self.c2 = torch.nn.Conv2d(4, 3, 3, padding=1).double()
        for conv in (self.c1, self.c2):
            with torch.no_grad():
                conv.weight.copy_(
                    torch.randn(conv.weight.shape, generator=gen, dtype=torch.float64) * 0.3
                )
                conv.bias.zero_()

    def forward(self, x):
        return torch.sigmoid(self.c2(torch.tanh(self.c1(x))))


def _fd_check(loss_fn, num_params=6, step=1e-4, rel_tol=1e-3):
    net = _StubNet()
    x = _rand(1, 3, 6, 6, seed=10, dtype=torch.float64)
    loss = loss_fn(net, x)
    loss.backward()
    gen = np.random.default_rng(0)
    params = list(net.parameters())
    checked = 0
    while checked < num_params:
        p = params[int(gen.integers(len(params)))]
        flat_idx = int(gen.integers(p.numel()))
        analytic = p.grad.flatten()[flat_idx].item()
        if abs(analytic) < 1e-6:
            continue
        with torch.no_grad():
            orig = p.flatten()[flat_idx].item()
            p.view(-1)[flat_idx] = orig + step
            hi = loss_fn(net, x).item()
            p.view(-1)[flat_idx] = orig - step
            lo = loss_fn(net, x).item()
            p.view(-1)[flat_idx] = orig
        numeric = (hi - lo) / (2 * step)
        assert abs(analytic - numeric) <= rel_tol * max(abs(numeric), 1e-8), (
            f"analytic {analytic} vs numeric {numeric}"
        )
        checked += 1


class TestGradients:
    def test_l1_gradient(self):
        target = _rand(1, 3, 6, 6, seed=11, dtype=torch.float64) * 0.8 + 0.1
        _fd_check(lambda net, x: l1_loss(net(x), target))

    def test_style_gradient(self):
        target = _rand(1, 3, 6, 6, seed=12, dtype=torch.float64)
        _fd_check(lambda net, x: style_loss([net(x)], [target], IdentityExtractor()))

    def test_adversarial_generator_gradient(self):
        _fd_check(lambda net, x: losses.generator_adversarial_loss(net(x)))
