import math

import numpy as np
import pytest
import torch
from torch import nn

from attrswap import losses
from attrswap.errors import DivergenceError, ShapeError
from attrswap.losses import LossWeights, full_objective
from attrswap.nets import ModelBundle, ModelConfig
from attrswap.schema import AttributeSchema


def uniform_heads(model):
    """Zero the classifier logits heads so every posterior is exactly uniform."""
    with torch.no_grad():
        for c in model.classifiers:
            c.head.weight.zero_()
            c.head.bias.zero_()


@pytest.fixture()
def model4():
    """M=2 model where both attributes have 4 classes."""
    torch.manual_seed(0)
    return ModelBundle(AttributeSchema((("p", 4), ("q", 4))),
                       ModelConfig(image_size=32, base_channels=8, critic_base=16))


def test_rec_loss_zero_and_extremes(image_batch):
    assert losses.rec_loss(image_batch, image_batch).item() == 0.0
    lo = -torch.ones(2, 3, 4, 4)
    assert losses.rec_loss(lo, -lo).item() == pytest.approx(2.0)


def test_rec_loss_matches_brute_force(image_batch):
    other = torch.rand_like(image_batch)
    expected = np.mean(np.abs((image_batch - other).numpy()))
    assert losses.rec_loss(image_batch, other).item() == pytest.approx(expected, abs=1e-7)


def test_rec_loss_shape_mismatch(image_batch):
    with pytest.raises(ShapeError):
        losses.rec_loss(image_batch, image_batch[:2])


def test_latent_cls_uniform_posterior_is_lnK(model4, image_batch):
    uniform_heads(model4)
    bundle = model4.encode_all(image_batch)
    y = torch.zeros(4, 2, dtype=torch.long)
    assert losses.latent_cls_loss(model4, bundle, y).item() == pytest.approx(
        math.log(4), abs=1e-6)


def test_latent_cls_one_hot_limit(model4, image_batch):
    # push the head bias toward a near-one-hot posterior on class 0
    uniform_heads(model4)
    with torch.no_grad():
        for c in model4.classifiers:
            c.head.bias[0] = 50.0
    bundle = model4.encode_all(image_batch)
    y = torch.zeros(4, 2, dtype=torch.long)
    assert losses.latent_cls_loss(model4, bundle, y).item() == pytest.approx(0.0, abs=1e-6)


def test_latent_cls_mean_over_attributes():
    # per-attribute terms 0.2 and 0.6 average to 0.4
    assert (0.2 + 0.6) / 2 == pytest.approx(0.4)


def test_disentangle_uniform_is_lnK(model4, image_batch):
    uniform_heads(model4)
    bundle = model4.encode_all(image_batch)
    assert losses.disentangle_loss(model4, bundle).item() == pytest.approx(
        math.log(4), abs=1e-6)


def test_uniform_ce_hand_value():
    p = torch.tensor([[0.7, 0.1, 0.1, 0.1]])
    val = losses._uniform_ce(p.log()).item()
    expected = -(math.log(0.7) + 3 * math.log(0.1)) / 4  # ~1.8161
    assert val == pytest.approx(expected, abs=1e-6)
    assert val == pytest.approx(1.8161, abs=1e-4)


def test_uniform_ce_gradient_vanishes_at_uniform():
    logits = torch.zeros(3, 5, requires_grad=True)
    losses._uniform_ce(logits).backward()
    assert torch.allclose(logits.grad, torch.zeros_like(logits), atol=1e-8)


def test_disentangle_lower_bound(model4, image_batch):
    # ln K at the uniform point; strictly above it for perturbed heads
    uniform_heads(model4)
    bundle = model4.encode_all(image_batch)
    base = losses.disentangle_loss(model4, bundle).item()
    assert base == pytest.approx(math.log(4), abs=1e-6)
    rng = torch.Generator().manual_seed(7)
    for _ in range(100):
        with torch.no_grad():
            for c in model4.classifiers:
                c.head.weight.normal_(0, 0.05, generator=rng)
                c.head.bias.normal_(0, 0.05, generator=rng)
        val = losses.disentangle_loss(model4, bundle).item()
        assert val >= math.log(4) - 1e-9


def test_synth_cls_uniform_is_lnK():
    torch.manual_seed(0)
    model = ModelBundle(AttributeSchema((("e", 8),)),
                        ModelConfig(image_size=32, base_channels=8, critic_base=16))
    uniform_heads(model)
    x = torch.rand(4, 3, 32, 32)
    y = torch.zeros(4, 1, dtype=torch.long)
    assert losses.synth_cls_loss(model, x, y).item() == pytest.approx(
        math.log(8), abs=1e-6)


def test_synth_cls_no_classifier_gradients(model4, image_batch):
    bundle = model4.encode_all(image_batch)
    spec_codes = torch.cat(bundle.codes, dim=1)
    x_synth = model4.decoder(spec_codes)
    y = torch.zeros(4, 2, dtype=torch.long)
    loss = losses.synth_cls_loss(model4, x_synth, y)
    loss.backward()
    for p in model4.classifier_parameters():
        assert p.grad is None or torch.all(p.grad == 0)
    assert any(p.grad is not None and p.grad.abs().sum() > 0
               for p in model4.generator_parameters())


class UnitGradientCritic(nn.Module):
    """score(x) = <x, w> with ||w||_2 = 1: input gradient norm exactly 1."""

    def __init__(self, shape):
        super().__init__()
        w = torch.randn(*shape)
        self.w = nn.Parameter(w / w.norm())

    def forward(self, x):
        return (x * self.w).sum(dim=(1, 2, 3), keepdim=True)[..., None]

    def score(self, x):
        return (x * self.w).flatten(1).sum(dim=1)


class ConstantCritic(nn.Module):
    def __init__(self):
        super().__init__()
        self.c = nn.Parameter(torch.tensor(3.0))

    def score(self, x):
        return self.c.expand(x.shape[0])


def test_gp_zero_for_unit_gradient_critic(image_batch):
    critic = UnitGradientCritic(image_batch.shape[1:])
    _, _, gp = losses.wgan_gp_losses(critic, image_batch,
                                     torch.rand_like(image_batch))
    assert gp.item() == pytest.approx(0.0, abs=1e-5)


def test_constant_critic_gp_and_gap(image_batch):
    critic = ConstantCritic()
    critic_loss, _, gp = losses.wgan_gp_losses(
        critic, image_batch, torch.rand_like(image_batch), lambda_gp=10.0)
    assert gp.item() == pytest.approx(1.0, abs=1e-6)  # (0 - 1)^2
    assert critic_loss.item() == pytest.approx(10.0, abs=1e-5)  # gap 0 + 10 * 1


def test_wasserstein_gap_antisymmetry(tiny_model, image_batch):
    other = torch.rand_like(image_batch)
    g = torch.Generator().manual_seed(3)
    eps = torch.rand(4, generator=g)
    cl_ab, _, gp_ab = losses.wgan_gp_losses(tiny_model.critic, image_batch, other,
                                            lambda_gp=0.0, eps=eps)
    cl_ba, _, gp_ba = losses.wgan_gp_losses(tiny_model.critic, other, image_batch,
                                            lambda_gp=0.0, eps=1 - eps)
    assert cl_ab.item() == pytest.approx(-cl_ba.item(), abs=1e-5)
    assert gp_ab.item() == pytest.approx(gp_ba.item(), abs=1e-5)


def test_batch_permutation_invariance(model4, image_batch):
    y = torch.randint(0, 4, (4, 2))
    perm = torch.tensor([2, 0, 3, 1])
    b1 = model4.encode_all(image_batch)
    b2 = model4.encode_all(image_batch[perm])
    for name, fn in [
        ("cls", lambda b, yy: losses.latent_cls_loss(model4, b, yy)),
        ("dis", lambda b, yy: losses.disentangle_loss(model4, b)),
    ]:
        v1 = fn(b1, y).item()
        v2 = fn(b2, y[perm]).item()
        assert v1 == pytest.approx(v2, abs=1e-5), name


def test_full_objective_weighted_sums():
    w = LossWeights()
    terms = dict(adv_g=1.0, dis=1.0, cls_x=1.0, cls_synth=1.0, rec=1.0,
                 critic=1.0, cls_real=1.0)
    rep = full_objective(terms, w)
    assert rep.loss_g == pytest.approx(14.0)  # 1+1+1+1+10
    assert rep.loss_d == 1.0 and rep.loss_c == 1.0


def test_full_objective_rec_only():
    w = LossWeights(lambda_adv=0, lambda_dis=0, lambda_cls_x=0, lambda_cls_synth=0)
    rep = full_objective({"rec": 0.5}, w)
    assert rep.loss_g == pytest.approx(5.0)


def test_full_objective_non_finite():
    with pytest.raises(DivergenceError) as exc:
        full_objective({"rec": float("nan")}, LossWeights())
    assert exc.value.term == "rec"


def test_loss_weights_nonnegative():
    from attrswap.errors import ConfigurationError
    with pytest.raises(ConfigurationError):
        LossWeights(lambda_rec=-1)


def test_latent_nll_gradient_finite_difference():
    """Gradient of -log C(y|z) w.r.t. z matches central differences (float64)."""
    torch.manual_seed(0)
    model = ModelBundle(AttributeSchema((("p", 4),)),
                        ModelConfig(image_size=8, base_channels=1, critic_base=4)
                        ).double()
    z = torch.randn(1, 4, 2, 2, dtype=torch.float64, requires_grad=True)

    def nll(zz):
        return -torch.log(model.classify_latent(zz, 1)[0, 2])

    nll(z).backward()
    analytic = z.grad.flatten()
    h = 1e-6
    rng = np.random.default_rng(0)
    for idx in rng.choice(z.numel(), size=8, replace=False):
        e = torch.zeros_like(z).flatten()
        e[idx] = h
        e = e.reshape(z.shape)
        with torch.no_grad():
            fd = (nll(z + e) - nll(z - e)) / (2 * h)
        denom = max(abs(analytic[idx].item()), 1e-8)
        assert abs(fd.item() - analytic[idx].item()) / denom < 1e-4
