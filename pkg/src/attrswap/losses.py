"""Loss terms of the full training objective.

Terms: L1 reconstruction, latent classification (codes fed straight to the
classifier heads), disentanglement to a uniform posterior, synthesized-image
classification, and the Wasserstein-GP adversarial pair. All log-likelihoods
and entropies are in nats.

Classifier (and critic) parameters are treated as constants inside the
generator-side terms: gradients flow through them to encoder/decoder
parameters only, matching the objective's grouping into L_G / L_D / L_C.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .errors import CapabilityError, ConfigurationError, DivergenceError, ShapeError
from .nets import LatentBundle, ModelBundle, PatchCritic


@dataclass(frozen=True)
class LossWeights:
    lambda_rec: float = 10.0
    lambda_gp: float = 10.0
    lambda_cls_x: float = 1.0
    lambda_dis: float = 1.0
    lambda_cls_synth: float = 1.0
    lambda_adv: float = 1.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if v < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {v}")


@dataclass
class LossReport:
    """Per-term scalars plus the grouped totals."""

    terms: dict[str, float] = field(default_factory=dict)
    loss_g: float = 0.0
    loss_d: float = 0.0
    loss_c: float = 0.0

    def lines(self, step: int) -> list[str]:
        out = [f"{step}\t{k}\t{v:.6g}" for k, v in sorted(self.terms.items())]
        out += [f"{step}\tL_G\t{self.loss_g:.6g}",
                f"{step}\tL_D\t{self.loss_d:.6g}",
                f"{step}\tL_C\t{self.loss_c:.6g}"]
        return out


@contextmanager
def frozen(*modules: torch.nn.Module):
    """Temporarily stop parameters from accumulating gradients; gradient flow
    *through* the modules to their inputs is unaffected."""
    params = [p for mod in modules for p in mod.parameters()]
    states = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad_(False)
    try:
        yield
    finally:
        for p, s in zip(params, states):
            p.requires_grad_(s)


def rec_loss(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Mean absolute error between an image batch and its reconstruction."""
    if x.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return (x - x_hat).abs().mean()


def latent_cls_loss(model: ModelBundle, bundle: LatentBundle,
                    labels: torch.Tensor) -> torch.Tensor:
    """(1/M) sum over attributes of NLL of the true label given the matching
    latent code; z_0 excluded."""
    M = model.M
    if labels.shape != (bundle.batch_size, M):
        raise ShapeError(f"labels shape {tuple(labels.shape)} != ({bundle.batch_size}, {M})")
    total = 0.0
    with frozen(model.classifiers):
        for m in range(1, M + 1):
            logits = model.latent_logits(bundle.codes[m], m)
            total = total + F.cross_entropy(logits, labels[:, m - 1])
    return total / M


def _uniform_ce(logits: torch.Tensor) -> torch.Tensor:
    """Cross-entropy from the uniform PMF to softmax(logits), batch-averaged."""
    return -F.log_softmax(logits, dim=1).mean()


def disentangle_loss(model: ModelBundle, bundle: LatentBundle) -> torch.Tensor:
    """Drives every code's posterior for every *other* attribute toward
    uniform; the z_0 term spans all M attributes. Averages the M+1 per-encoder
    terms."""
    M = model.M
    with frozen(model.classifiers):
        per_encoder = []
        for m in range(0, M + 1):
            others = [mp for mp in range(1, M + 1) if mp != m]
            if not others:
                continue
            term = sum(_uniform_ce(model.latent_logits(bundle.codes[m], mp))
                       for mp in others) / len(others)
            per_encoder.append(term)
    if not per_encoder:
        raise ShapeError("disentangle_loss needs at least one cross-attribute pair")
    return sum(per_encoder) / len(per_encoder)


def synth_cls_loss(model: ModelBundle, x_synth: torch.Tensor,
                   expected_labels: torch.Tensor) -> torch.Tensor:
    """(1/M) sum over attributes of NLL of the shuffle-induced label for the
    synthesized image, through the full image classifier."""
    M = model.M
    if expected_labels.shape != (x_synth.shape[0], M):
        raise ShapeError(
            f"labels shape {tuple(expected_labels.shape)} != ({x_synth.shape[0]}, {M})")
    total = 0.0
    with frozen(model.classifiers):
        for m in range(1, M + 1):
            logits = model.image_logits(x_synth, m)
            total = total + F.cross_entropy(logits, expected_labels[:, m - 1])
    return total / M


def classifier_loss(model: ModelBundle, x: torch.Tensor,
                    labels: torch.Tensor) -> torch.Tensor:
    """Standard cross-entropy of the image classifiers on real labeled images
    (the classifier-group objective L_C)."""
    total = 0.0
    for m in range(1, model.M + 1):
        total = total + F.cross_entropy(model.image_logits(x, m), labels[:, m - 1])
    return total / model.M


def gradient_penalty(critic: PatchCritic, x_real: torch.Tensor,
                     x_synth: torch.Tensor,
                     generator: torch.Generator | None = None,
                     eps: torch.Tensor | None = None) -> torch.Tensor:
    """E[(||grad_xhat c(xhat)||_2 - 1)^2] with xhat = eps*x_real + (1-eps)*x_synth,
    one eps draw per sample."""
    b = x_real.shape[0]
    if eps is None:
        eps = torch.rand(b, 1, 1, 1, generator=generator, dtype=x_real.dtype)
    else:
        eps = eps.view(b, 1, 1, 1).to(x_real.dtype)
    x_hat = (eps * x_real + (1 - eps) * x_synth.detach()).requires_grad_(True)
    score = critic.score(x_hat).sum()
    try:
        (grads,) = torch.autograd.grad(score, x_hat, create_graph=True,
                                       allow_unused=True, materialize_grads=True)
    except RuntimeError as e:
        raise CapabilityError(f"substrate cannot differentiate the critic gradient: {e}") from e
    norms = grads.flatten(1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def wgan_gp_losses(critic: PatchCritic, x_real: torch.Tensor,
                   x_synth: torch.Tensor, lambda_gp: float = 10.0,
                   generator: torch.Generator | None = None,
                   eps: torch.Tensor | None = None,
                   ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Returns (critic_loss, generator_adv_loss, gp).

    critic_loss = -(E[c(x_real)] - E[c(x_synth)]) + lambda_gp * gp, with c the
    mean patch score; generator_adv_loss = -E[c(x_synth)] with the critic's
    parameters held constant.
    """
    if x_real.shape[0] != x_synth.shape[0]:
        raise ShapeError("real and synthesized batches must have equal size")
    gp = gradient_penalty(critic, x_real, x_synth, generator=generator, eps=eps)
    gap = critic.score(x_real).mean() - critic.score(x_synth.detach()).mean()
    critic_loss = -gap + lambda_gp * gp
    with frozen(critic):
        generator_adv = -critic.score(x_synth).mean()
    return critic_loss, generator_adv, gp


def saturating_gan_losses(critic: PatchCritic, x_real: torch.Tensor,
                          x_synth: torch.Tensor
                          ) -> tuple[torch.Tensor, torch.Tensor]:
    """Cross-entropy GAN alternative behind the same interface (patch scores
    read as logits); kept for completeness, not the default."""
    real_logit = critic.score(x_real)
    fake_logit = critic.score(x_synth.detach())
    critic_loss = (F.binary_cross_entropy_with_logits(real_logit, torch.ones_like(real_logit))
                   + F.binary_cross_entropy_with_logits(fake_logit, torch.zeros_like(fake_logit)))
    with frozen(critic):
        fake_logit_g = critic.score(x_synth)
        gen_loss = F.binary_cross_entropy_with_logits(
            fake_logit_g, torch.ones_like(fake_logit_g))
    return critic_loss, gen_loss


def full_objective(terms: dict[str, float], weights: LossWeights) -> LossReport:
    """Combine raw term values into the grouped totals L_G, L_D, L_C."""
    for name, v in terms.items():
        if not math.isfinite(v):
            raise DivergenceError(f"non-finite loss term {name!r}: {v}", term=name)
    loss_g = (weights.lambda_adv * terms.get("adv_g", 0.0)
              + weights.lambda_dis * terms.get("dis", 0.0)
              + weights.lambda_cls_x * terms.get("cls_x", 0.0)
              + weights.lambda_cls_synth * terms.get("cls_synth", 0.0)
              + weights.lambda_rec * terms.get("rec", 0.0))
    loss_d = terms.get("critic", 0.0)
    loss_c = terms.get("cls_real", 0.0)
    return LossReport(terms=dict(terms), loss_g=loss_g, loss_d=loss_d, loss_c=loss_c)
