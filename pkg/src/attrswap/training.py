"""Training loop: shuffle-spec sampling, classifier pretraining, alternating
critic/generator/classifier updates, and resumable checkpointing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import losses
from .errors import ConfigurationError, ContractError, DivergenceError, ShapeError
from .losses import LossReport, LossWeights
from .nets import (LatentBundle, ModelBundle, ModelConfig, load_checkpoint,
                   save_checkpoint)
from .schema import Dataset

log = logging.getLogger(__name__)


@dataclass
class ShuffleSpec:
    """Per-attribute batch permutations r_1..r_M with their induced labels."""

    permutations: list[torch.Tensor]  # M long tensors, each a permutation of [0, b)
    induced_labels: torch.Tensor | None = None
    bijective: bool = True  # False only in the with-replacement variant

    def __post_init__(self):
        b = self.batch_size
        for r in self.permutations:
            if self.bijective and not torch.equal(torch.sort(r).values, torch.arange(b)):
                raise ContractError("shuffle index vector is not a bijection on [0, b)")
            if r.numel() and (r.min() < 0 or r.max() >= b):
                raise ContractError("shuffle index out of range")

    @property
    def batch_size(self) -> int:
        return self.permutations[0].shape[0]

    @property
    def M(self) -> int:
        return len(self.permutations)

    def with_labels(self, labels: torch.Tensor) -> "ShuffleSpec":
        """Attach the donor labels: induced[i][m] = labels[r_m[i]][m]."""
        if labels.shape != (self.batch_size, self.M):
            raise ShapeError(
                f"labels shape {tuple(labels.shape)} != ({self.batch_size}, {self.M})")
        induced = torch.stack(
            [labels[r, m] for m, r in enumerate(self.permutations)], dim=1)
        return ShuffleSpec(self.permutations, induced, self.bijective)


def sample_shuffle(b: int, M: int, generator: torch.Generator,
                   with_replacement: bool = False) -> ShuffleSpec:
    """M independent uniform random permutations of [0, b). The
    with-replacement variant draws plain random integers instead."""
    if b < 2:
        raise ContractError(f"shuffling degenerates at batch size {b}; need b >= 2")
    if with_replacement:
        idx = [torch.randint(0, b, (b,), generator=generator) for _ in range(M)]
        return ShuffleSpec(idx, bijective=False)
    perms = [torch.randperm(b, generator=generator) for _ in range(M)]
    return ShuffleSpec(perms)


def synthesize_shuffled(model: ModelBundle, bundle: LatentBundle,
                        spec: ShuffleSpec, labels: torch.Tensor
                        ) -> tuple[torch.Tensor, torch.Tensor]:
    """Decode the batch with code m gathered by r_m (z_0 unpermuted); returns
    the synthesized images and the shuffle-induced labels."""
    if spec.M != model.M:
        raise ShapeError(f"spec has {spec.M} permutations, model has M={model.M}")
    if spec.batch_size != bundle.batch_size:
        raise ShapeError("shuffle spec batch size does not match bundle")
    codes = [bundle.codes[0]]
    codes += [bundle.codes[m][spec.permutations[m - 1]] for m in range(1, model.M + 1)]
    x_synth = model.decoder(torch.cat(codes, dim=1))
    return x_synth, spec.with_labels(labels).induced_labels


@dataclass
class OptimizerConfig:
    name: str = "adam"
    lr: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.999)

    def build(self, params) -> torch.optim.Optimizer:
        params = list(params)
        if self.name.lower() == "adam":
            return torch.optim.Adam(params, lr=self.lr, betas=tuple(self.betas))
        if self.name.lower() == "sgd":
            return torch.optim.SGD(params, lr=self.lr)
        raise ConfigurationError(f"unknown optimizer {self.name!r}")


@dataclass
class TrainConfig:
    batch_size: int = 16
    steps: int = 1000
    critic_steps_per_gen: int = 5
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    classifier_mode: str = "pretrain_frozen"  # or "joint"
    pretrain_steps: int = 2000
    pretrain_target_accuracy: float = 0.99
    shuffle_with_replacement: bool = False
    seed: int = 0
    checkpoint_every: int = 1000
    log_every: int = 50

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigurationError(
                "batch_size must be >= 2 (shuffle synthesis degenerates at b=1)")
        if self.steps < 0:
            raise ConfigurationError("steps must be >= 0")
        if self.classifier_mode not in ("pretrain_frozen", "joint"):
            raise ConfigurationError(f"unknown classifier_mode {self.classifier_mode!r}")


def _to_tensors(dataset: Dataset) -> tuple[torch.Tensor, torch.Tensor]:
    x = torch.from_numpy(np.array(dataset.images, dtype=np.float32)).permute(0, 3, 1, 2)
    y = torch.from_numpy(np.array(dataset.labels, dtype=np.int64))
    return x, y


def _sample_batch(x: torch.Tensor, y: torch.Tensor, b: int,
                  generator: torch.Generator) -> tuple[torch.Tensor, torch.Tensor]:
    idx = torch.randint(0, x.shape[0], (b,), generator=generator)
    return x[idx], y[idx]


def pretrain_classifiers(model: ModelBundle, train: Dataset,
                         config: TrainConfig) -> dict[str, float]:
    """Train each attribute classifier with cross-entropy on real images up to
    a step budget or target accuracy; returns per-attribute train accuracy."""
    x_all, y_all = _to_tensors(train)
    gen = torch.Generator().manual_seed(config.seed + 101)
    opt = config.optimizer.build(model.classifier_parameters())
    for step in range(config.pretrain_steps):
        x, y = _sample_batch(x_all, y_all, config.batch_size, gen)
        loss = losses.classifier_loss(model, x, y)
        if not torch.isfinite(loss):
            raise DivergenceError(f"classifier pretraining diverged at step {step}",
                                  term="cls_real")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % 100 == 99:
            acc = classifier_accuracy(model, train)
            if min(acc.values()) >= config.pretrain_target_accuracy:
                log.info("pretraining hit target accuracy at step %d: %s", step, acc)
                break
    return classifier_accuracy(model, train)


@torch.no_grad()
def classifier_accuracy(model: ModelBundle, dataset: Dataset,
                        batch: int = 256) -> dict[str, float]:
    x_all, y_all = _to_tensors(dataset)
    correct = np.zeros(model.M)
    for i in range(0, len(x_all), batch):
        x, y = x_all[i:i + batch], y_all[i:i + batch]
        for m in range(1, model.M + 1):
            pred = model.image_logits(x, m).argmax(dim=1)
            correct[m - 1] += (pred == y[:, m - 1]).sum().item()
    n = max(len(x_all), 1)
    return {name: correct[i] / n for i, name in enumerate(model.schema.names)}


def train_step(model: ModelBundle, x: torch.Tensor, y: torch.Tensor,
               config: TrainConfig, opts: dict[str, torch.optim.Optimizer],
               generator: torch.Generator) -> LossReport:
    """One full update cycle: critic_steps_per_gen critic updates, one
    generator update, and (in joint mode) one classifier update."""
    w = config.weights
    terms: dict[str, float] = {}

    # critic phase
    critic_loss_val = gp_val = 0.0
    if w.lambda_adv > 0:
        for _ in range(config.critic_steps_per_gen):
            spec = _draw_spec(x.shape[0], model.M, config, generator)
            with torch.no_grad():
                bundle = model.encode_all(x)
            x_synth, _ = synthesize_shuffled(model, bundle, spec, y)
            critic_loss, _, gp = losses.wgan_gp_losses(
                model.critic, x, x_synth.detach(), lambda_gp=w.lambda_gp,
                generator=generator)
            _check_finite(critic_loss, "critic")
            opts["critic"].zero_grad()
            critic_loss.backward()
            opts["critic"].step()
            critic_loss_val, gp_val = critic_loss.item(), gp.item()
    terms["critic"] = critic_loss_val
    terms["gp"] = gp_val

    # generator phase
    bundle = model.encode_all(x)
    x_rec = model.decode(bundle)
    spec = _draw_spec(x.shape[0], model.M, config, generator)
    x_synth, induced = synthesize_shuffled(model, bundle, spec, y)

    rec = losses.rec_loss(x, x_rec)
    cls_x = losses.latent_cls_loss(model, bundle, y)
    dis = losses.disentangle_loss(model, bundle)
    cls_synth = losses.synth_cls_loss(model, x_synth, induced)
    if w.lambda_adv > 0:
        with losses.frozen(model.critic):
            adv_g = -model.critic.score(x_synth).mean()
    else:
        adv_g = torch.zeros(())
    loss_g = (w.lambda_adv * adv_g + w.lambda_dis * dis + w.lambda_cls_x * cls_x
              + w.lambda_cls_synth * cls_synth + w.lambda_rec * rec)
    _check_finite(loss_g, "L_G")
    opts["generator"].zero_grad()
    loss_g.backward()
    opts["generator"].step()
    terms.update(rec=rec.item(), cls_x=cls_x.item(), dis=dis.item(),
                 cls_synth=cls_synth.item(), adv_g=adv_g.item())

    # classifier phase (joint mode only)
    cls_real_val = 0.0
    if config.classifier_mode == "joint":
        cls_real = losses.classifier_loss(model, x, y)
        _check_finite(cls_real, "cls_real")
        opts["classifier"].zero_grad()
        cls_real.backward()
        opts["classifier"].step()
        cls_real_val = cls_real.item()
    terms["cls_real"] = cls_real_val

    return losses.full_objective(terms, w)


def _draw_spec(b: int, M: int, config: TrainConfig,
               generator: torch.Generator) -> ShuffleSpec:
    return sample_shuffle(b, M, generator,
                          with_replacement=config.shuffle_with_replacement)


def _check_finite(t: torch.Tensor, term: str) -> None:
    if not torch.isfinite(t):
        raise DivergenceError(f"non-finite loss in term {term!r}", term=term)


def build_optimizers(model: ModelBundle,
                     config: TrainConfig) -> dict[str, torch.optim.Optimizer]:
    return {
        "generator": config.optimizer.build(model.generator_parameters()),
        "critic": config.optimizer.build(model.critic_parameters()),
        "classifier": config.optimizer.build(model.classifier_parameters()),
    }


def train(model: ModelBundle, train_ds: Dataset, config: TrainConfig,
          out_dir: str | Path, resume: bool = False) -> Path:
    """Run the loop with periodic checkpointing and loss logging; returns the
    final checkpoint path. Deterministic given the seed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loss_log = out_dir / "loss_log.tsv"
    x_all, y_all = _to_tensors(train_ds)
    gen = torch.Generator().manual_seed(config.seed)
    opts = build_optimizers(model, config)
    start_step = 0

    state_path = out_dir / "train_state.pt"
    if resume and state_path.exists():
        state = torch.load(state_path, weights_only=False)
        model.load_state_dict(state["model"])
        for k, opt in opts.items():
            opt.load_state_dict(state["optimizers"][k])
        gen.set_state(state["rng"])
        start_step = state["step"]
        log.info("resumed from step %d", start_step)
    elif config.classifier_mode == "pretrain_frozen" and start_step == 0:
        acc = pretrain_classifiers(model, train_ds, config)
        log.info("classifier pretrain accuracy: %s", acc)

    mode = "a" if (resume and start_step) else "w"
    with open(loss_log, mode, encoding="utf-8") as logf:
        if mode == "w":
            logf.write("step\tterm\tvalue\n")
        for step in range(start_step, config.steps):
            x, y = _sample_batch(x_all, y_all, config.batch_size, gen)
            report = train_step(model, x, y, config, opts, gen)
            if step % config.log_every == 0 or step == config.steps - 1:
                logf.write("\n".join(report.lines(step)) + "\n")
                logf.flush()
            if config.checkpoint_every and (step + 1) % config.checkpoint_every == 0:
                _save_state(out_dir, model, opts, gen, step + 1, config)
    _save_state(out_dir, model, opts, gen, config.steps, config)
    save_checkpoint(out_dir / "checkpoint", model,
                    extra={"step": config.steps, "config": _config_dict(config)})
    return out_dir / "checkpoint"


def _config_dict(config: TrainConfig) -> dict:
    d = asdict(config)
    d["optimizer"]["betas"] = list(d["optimizer"]["betas"])
    return d


def _save_state(out_dir: Path, model: ModelBundle, opts, gen, step: int,
                config: TrainConfig) -> None:
    torch.save({
        "model": model.state_dict(),
        "optimizers": {k: o.state_dict() for k, o in opts.items()},
        "rng": gen.get_state(),
        "step": step,
        "config": _config_dict(config),
    }, out_dir / "train_state.pt")


def load_model_from_checkpoint(path: str | Path) -> ModelBundle:
    model, _ = load_checkpoint(path)
    model.eval()
    return model
