"""Label-free latent manipulations on a trained model: attribute swapping,
convex mixing, linear interpolation, and mean-attribute codes.

All operations are read-only over the model. The unspecified-variation code
z_0 always comes from the source/base image and is never swapped or mixed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ContractError
from .nets import ModelBundle
from .schema import Dataset

WEIGHT_TOL = 1e-6


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    """(H, W, C) in [-1, 1] -> (1, C, H, W) float tensor."""
    return torch.from_numpy(np.array(image, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)


def tensor_to_image(x: torch.Tensor) -> np.ndarray:
    """(1, C, H, W) -> (H, W, C) float32 array."""
    return x.squeeze(0).permute(1, 2, 0).detach().numpy().astype(np.float32)


@dataclass(frozen=True)
class SwapRequest:
    source: np.ndarray
    donors: dict[int, np.ndarray]  # attribute index -> donor image
    attributes_to_swap: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        swap = self.attributes_to_swap or frozenset(self.donors)
        object.__setattr__(self, "attributes_to_swap", frozenset(swap))
        if not self.attributes_to_swap:
            raise ContractError("attributes_to_swap must be nonempty")
        if 0 in self.attributes_to_swap:
            raise ContractError("z_0 is never swapped")
        missing = self.attributes_to_swap - set(self.donors)
        if missing:
            raise ContractError(f"no donor image for attributes {sorted(missing)}")


@dataclass(frozen=True)
class MixRequest:
    attribute: int
    components: tuple[tuple[np.ndarray, float], ...]
    base: np.ndarray | None = None  # defaults to the last component
    allow_signed: bool = False

    def __post_init__(self):
        weights = [w for _, w in self.components]
        if abs(sum(weights) - 1.0) > WEIGHT_TOL:
            raise ContractError(f"mix weights must sum to 1, got {sum(weights)}")
        if not self.allow_signed and any(w < 0 for w in weights):
            raise ContractError("convex mix requires nonnegative weights")


@torch.no_grad()
def swap(model: ModelBundle, request: SwapRequest) -> np.ndarray:
    """Replace the source's code m with the donor's code m for each requested
    attribute, then decode."""
    for m in request.attributes_to_swap:
        if not 1 <= m <= model.M:
            raise ContractError(f"attribute index {m} outside 1..{model.M}")
    bundle = model.encode_all(image_to_tensor(request.source))
    codes = list(bundle.codes)
    for m in sorted(request.attributes_to_swap):
        donor_bundle = model.encode_all(image_to_tensor(request.donors[m]))
        codes[m] = donor_bundle.codes[m]
    return tensor_to_image(model.decoder(torch.cat(codes, dim=1)))


@torch.no_grad()
def mix(model: ModelBundle, request: MixRequest) -> np.ndarray:
    """Decode the weighted sum of the components' codes for one attribute,
    with all other codes taken from the base image."""
    m = request.attribute
    if not 1 <= m <= model.M:
        raise ContractError(f"attribute index {m} outside 1..{model.M}")
    base = request.base if request.base is not None else request.components[-1][0]
    codes = list(model.encode_all(image_to_tensor(base)).codes)
    mixed = None
    for image, weight in request.components:
        z = model.encode_all(image_to_tensor(image)).codes[m]
        mixed = weight * z if mixed is None else mixed + weight * z
    codes[m] = mixed
    return tensor_to_image(model.decoder(torch.cat(codes, dim=1)))


@torch.no_grad()
def interpolate(model: ModelBundle, m: int, image_i: np.ndarray,
                image_j: np.ndarray, steps: int = 8,
                base: np.ndarray | None = None) -> list[np.ndarray]:
    """Decode alpha*z_m(i) + (1-alpha)*z_m(j) for alpha uniform on [0, 1];
    the first frame is the pure-j decode, the last the pure-i decode. Other
    codes come from the base image (default: image_j)."""
    if steps < 2:
        raise ContractError(f"need steps >= 2, got {steps}")
    if not 1 <= m <= model.M:
        raise ContractError(f"attribute index {m} outside 1..{model.M}")
    z_i = model.encode_all(image_to_tensor(image_i)).codes[m]
    z_j = model.encode_all(image_to_tensor(image_j)).codes[m]
    base_codes = list(model.encode_all(
        image_to_tensor(base if base is not None else image_j)).codes)
    frames = []
    for alpha in np.linspace(0.0, 1.0, steps):
        codes = list(base_codes)
        if alpha == 0.0:
            codes[m] = z_j  # exact endpoint, no float blend
        elif alpha == 1.0:
            codes[m] = z_i
        else:
            codes[m] = float(alpha) * z_i + float(1 - alpha) * z_j
        frames.append(tensor_to_image(model.decoder(torch.cat(codes, dim=1))))
    return frames


@torch.no_grad()
def mean_code(model: ModelBundle, dataset: Dataset, m: int,
              label: int | None = None, batch: int = 64) -> torch.Tensor:
    """Elementwise mean of E_m over the dataset, optionally filtered to one
    class of attribute m; usable anywhere a code is accepted."""
    if not 1 <= m <= model.M:
        raise ContractError(f"attribute index {m} outside 1..{model.M}")
    images = dataset.images
    if label is not None:
        mask = dataset.labels[:, m - 1] == label
        images = images[mask]
    if len(images) == 0:
        raise ContractError("mean_code over an empty selection")
    total, n = None, 0
    for i in range(0, len(images), batch):
        x = torch.from_numpy(np.array(images[i:i + batch], dtype=np.float32)).permute(0, 3, 1, 2)
        z = model.encoders[m](x).sum(dim=0, keepdim=True)
        total = z if total is None else total + z
        n += x.shape[0]
    return total / n


@torch.no_grad()
def decode_with_code(model: ModelBundle, base: np.ndarray, m: int,
                     code: torch.Tensor) -> np.ndarray:
    """Decode the base image with its code m replaced by an arbitrary code
    (e.g. a mean-attribute code)."""
    codes = list(model.encode_all(image_to_tensor(base)).codes)
    codes[m] = code
    return tensor_to_image(model.decoder(torch.cat(codes, dim=1)))
