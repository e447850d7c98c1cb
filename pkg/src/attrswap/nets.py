"""Network definitions: M+1 attribute encoders, the shared decoder, M
attribute classifiers with latent injection, and a patch critic.

Tensors are channels-first (b, C, H, W). At the 128x128 reference scale with
default widths the layer shapes match the published architecture tables
exactly; image size and widths are otherwise free parameters (the bottleneck
is always at H/4 x W/4).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ConfigurationError, ContractError, ShapeError
from .schema import AttributeSchema

IN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 128
    base_channels: int = 32        # enc-1 width; enc-2/3 double it twice
    decoder_res_blocks: int = 6
    classifier_base: int = 64      # classifier block-1 width; block-2 doubles it
    critic_base: int = 64
    critic_layers: int = 0         # 0 = auto: 6 at 128x128, 5 at 64, 4 at 32
    critic_channel_cap: int = 2048
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.image_size % 4 != 0:
            raise ConfigurationError("image_size must be divisible by 4")

    @property
    def latent_channels(self) -> int:
        return 4 * self.base_channels

    @property
    def resolved_critic_layers(self) -> int:
        if self.critic_layers:
            return self.critic_layers
        n = int(np.log2(self.image_size)) - 1  # 6 at 128, 4 at 32
        return max(2, n)


def _conv_in_relu(c_in: int, c_out: int, k: int, s: int, reflect_pad: int = 0,
                  zero_pad: int = 0) -> nn.Sequential:
    layers: list[nn.Module] = []
    if reflect_pad:
        layers.append(nn.ReflectionPad2d(reflect_pad))
    layers.append(nn.Conv2d(c_in, c_out, k, stride=s, padding=zero_pad))
    layers.append(nn.InstanceNorm2d(c_out, eps=IN_EPS, affine=True))
    layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


class Encoder(nn.Module):
    """3-block conv stack; output is the latent code at H/4 x W/4."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c = cfg.base_channels
        self.net = nn.Sequential(
            _conv_in_relu(3, c, k=7, s=1, reflect_pad=3),
            _conv_in_relu(c, 2 * c, k=3, s=2, zero_pad=1),
            _conv_in_relu(2 * c, 4 * c, k=3, s=2, zero_pad=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class ResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = _conv_in_relu(channels, channels, k=3, s=1, zero_pad=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class UpBlock(nn.Module):
    """Resize-convolution upsampling: nearest-neighbor 2x then stride-1 conv."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.conv = _conv_in_relu(c_in, c_out, k=3, s=1, reflect_pad=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(self.up(x))


class Decoder(nn.Module):
    """Depth-concatenated codes -> residual blocks -> 2x resize-conv
    upsampling twice -> 7x7 conv -> tanh."""

    def __init__(self, cfg: ModelConfig, M: int):
        super().__init__()
        c = cfg.base_channels
        ch = cfg.latent_channels * (M + 1)
        self.in_channels = ch
        blocks: list[nn.Module] = [ResBlock(ch) for _ in range(cfg.decoder_res_blocks)]
        blocks.append(UpBlock(ch, 2 * c))
        blocks.append(UpBlock(2 * c, c))
        blocks.append(nn.ReflectionPad2d(3))
        blocks.append(nn.Conv2d(c, 3, 7))
        blocks.append(nn.Tanh())
        self.net = nn.Sequential(*blocks)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[1] != self.in_channels:
            raise ShapeError(
                f"decoder expects {self.in_channels} channels, got {z.shape[1]}")
        return self.net(z)


class AttributeClassifier(nn.Module):
    """Two strided conv blocks, then flatten -> dense class logits. The
    block-2 output shape equals the encoder bottleneck so latent codes can be
    injected directly into the logits head."""

    def __init__(self, cfg: ModelConfig, num_classes: int):
        super().__init__()
        c = cfg.classifier_base
        latent = cfg.latent_channels
        self.features = nn.Sequential(
            nn.Conv2d(3, c, 4, stride=2, padding=1),
            nn.LeakyReLU(cfg.leaky_slope, inplace=True),
            nn.Conv2d(c, latent, 4, stride=2, padding=1),
            nn.LeakyReLU(cfg.leaky_slope, inplace=True),
        )
        s = cfg.image_size // 4
        self.feature_shape = (latent, s, s)
        self.head = nn.Linear(latent * s * s, num_classes)

    def logits_from_latent(self, z: torch.Tensor) -> torch.Tensor:
        if tuple(z.shape[1:]) != self.feature_shape:
            raise ShapeError(
                f"latent shape {tuple(z.shape[1:])} != classifier feature shape "
                f"{self.feature_shape}")
        return self.head(z.flatten(1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.logits_from_latent(self.features(x))


class PatchCritic(nn.Module):
    """PatchGAN-style Wasserstein critic: strided 4x4 convs doubling channels,
    then a 3x3 conv to a single channel of unbounded patch scores."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        layers: list[nn.Module] = []
        c_in, c_out = 3, cfg.critic_base
        for _ in range(cfg.resolved_critic_layers):
            layers.append(nn.Conv2d(c_in, c_out, 4, stride=2, padding=1))
            layers.append(nn.LeakyReLU(cfg.leaky_slope, inplace=True))
            c_in, c_out = c_out, min(2 * c_out, cfg.critic_channel_cap)
        layers.append(nn.Conv2d(c_in, 1, 3, stride=1, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)

    def score(self, x: torch.Tensor) -> torch.Tensor:
        """Scalar critic value per image: mean over the patch score map."""
        return self(x).flatten(1).mean(dim=1)


@dataclass
class LatentBundle:
    """The M+1 codes (z_0, z_1..z_M) for a batch, with provenance tags."""

    codes: list[torch.Tensor]
    sources: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.sources:
            self.sources = list(range(len(self.codes)))
        shapes = {tuple(c.shape) for c in self.codes}
        if len(shapes) != 1:
            raise ShapeError(f"codes have inconsistent shapes: {shapes}")

    @property
    def batch_size(self) -> int:
        return self.codes[0].shape[0]

    def concat(self) -> torch.Tensor:
        return torch.cat(self.codes, dim=1)


class ModelBundle(nn.Module):
    """All trainable submodules for one schema: encoders E_0..E_M, decoder,
    classifiers C_1..C_M, and the patch critic."""

    def __init__(self, schema: AttributeSchema, cfg: ModelConfig):
        super().__init__()
        self.schema = schema
        self.cfg = cfg
        self.encoders = nn.ModuleList(
            [Encoder(cfg) for _ in range(schema.M + 1)])
        self.decoder = Decoder(cfg, schema.M)
        self.classifiers = nn.ModuleList(
            [AttributeClassifier(cfg, schema.class_count(m))
             for m in range(1, schema.M + 1)])
        self.critic = PatchCritic(cfg)
        # latent-injection compatibility: bottleneck shape must match the
        # classifier block-2 output for every attribute
        s = cfg.image_size // 4
        expected = (cfg.latent_channels, s, s)
        for i, c in enumerate(self.classifiers):
            if c.feature_shape != expected:
                raise ShapeError(
                    f"classifier {i + 1} feature shape {c.feature_shape} != "
                    f"encoder bottleneck {expected}")

    @property
    def M(self) -> int:
        return self.schema.M

    def encode_all(self, x: torch.Tensor) -> LatentBundle:
        if x.dim() != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected (b, 3, H, W) images, got {tuple(x.shape)}")
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ShapeError(f"H and W must be divisible by 4, got {tuple(x.shape[2:])}")
        return LatentBundle([enc(x) for enc in self.encoders])

    def decode(self, bundle: LatentBundle) -> torch.Tensor:
        return self.decoder(bundle.concat())

    def reconstruct(self, x: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode_all(x))

    def _classifier(self, m: int) -> AttributeClassifier:
        if m == 0:
            raise ContractError("no classifier for the unspecified-variation code (m=0)")
        if not 1 <= m <= self.M:
            raise ContractError(f"attribute index {m} outside 1..{self.M}")
        return self.classifiers[m - 1]

    def classify_image(self, x: torch.Tensor, m: int) -> torch.Tensor:
        """Softmax PMF over attribute m's classes from pixels."""
        return torch.softmax(self._classifier(m)(x), dim=1)

    def classify_latent(self, z: torch.Tensor, m: int) -> torch.Tensor:
        """Softmax PMF from a latent code fed straight into the logits head."""
        return torch.softmax(self._classifier(m).logits_from_latent(z), dim=1)

    def latent_logits(self, z: torch.Tensor, m: int) -> torch.Tensor:
        return self._classifier(m).logits_from_latent(z)

    def image_logits(self, x: torch.Tensor, m: int) -> torch.Tensor:
        return self._classifier(m)(x)

    def critic_score(self, x: torch.Tensor) -> torch.Tensor:
        return self.critic(x)

    # -- submodule grouping used by the optimizers and the gradient census --
    def generator_parameters(self):
        yield from self.encoders.parameters()
        yield from self.decoder.parameters()

    def classifier_parameters(self):
        yield from self.classifiers.parameters()

    def critic_parameters(self):
        yield from self.critic.parameters()


# ---------------------------------------------------------------------------
# checkpoint I/O: one parameter blob per submodule plus a manifest
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, model: ModelBundle,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blobs = {
        "encoders": model.encoders.state_dict(),
        "decoder": model.decoder.state_dict(),
        "classifiers": model.classifiers.state_dict(),
        "critic": model.critic.state_dict(),
    }
    for name, sd in blobs.items():
        torch.save(sd, path / f"{name}.pt")
    s = model.cfg.image_size // 4
    manifest = {
        "schema": model.schema.to_dict(),
        "model_config": asdict(model.cfg),
        "code_shape": [model.cfg.latent_channels, s, s],
        "extra": extra or {},
    }
    with open(path / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
    return path


def checkpoint_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    for blob in sorted(Path(path).glob("*.pt")):
        h.update(blob.name.encode())
        h.update(blob.read_bytes())
    return h.hexdigest()[:16]


def load_checkpoint(path: str | Path) -> tuple[ModelBundle, dict]:
    path = Path(path)
    with open(path / "manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    schema = AttributeSchema.from_dict(manifest["schema"])
    cfg = ModelConfig(**manifest["model_config"])
    model = ModelBundle(schema, cfg)
    for name, module in (("encoders", model.encoders), ("decoder", model.decoder),
                         ("classifiers", model.classifiers), ("critic", model.critic)):
        sd = torch.load(path / f"{name}.pt", weights_only=True)
        own = module.state_dict()
        for k, v in sd.items():
            if k not in own:
                raise ShapeError(f"checkpoint blob {name}: unexpected key {k}")
            if tuple(own[k].shape) != tuple(v.shape):
                raise ShapeError(
                    f"checkpoint blob {name}: shape mismatch for {k}: "
                    f"{tuple(v.shape)} vs {tuple(own[k].shape)}")
        module.load_state_dict(sd)
    s = cfg.image_size // 4
    if manifest["code_shape"] != [cfg.latent_channels, s, s]:
        raise ShapeError("manifest code_shape inconsistent with model config")
    return model, manifest
