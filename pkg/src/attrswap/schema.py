"""Attribute schema and labeled-image dataset containers.

Images are stored channels-last as float32 arrays in [-1, 1], matching the
tanh output range of the decoder. Attribute index 0 is reserved everywhere
for the unspecified-variation code and never appears in a schema.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SplitError


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered list of (name, class_count) pairs; M is the list length."""

    attributes: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if len(self.attributes) < 1:
            raise ConfigurationError("schema needs at least one attribute")
        names = [n for n, _ in self.attributes]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate attribute names: {names}")
        for name, count in self.attributes:
            if count < 2:
                raise ConfigurationError(
                    f"attribute {name!r} needs class_count >= 2, got {count}"
                )

    @property
    def M(self) -> int:
        return len(self.attributes)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.attributes]

    def class_count(self, m: int) -> int:
        """Class count for attribute index m in 1..M."""
        if not 1 <= m <= self.M:
            raise ConfigurationError(f"attribute index {m} outside 1..{self.M}")
        return self.attributes[m - 1][1]

    def index_of(self, name: str) -> int:
        """1-based index of a named attribute."""
        for i, (n, _) in enumerate(self.attributes):
            if n == name:
                return i + 1
        raise ConfigurationError(f"unknown attribute {name!r}")

    def to_dict(self) -> dict:
        return {"attributes": [{"name": n, "class_count": c} for n, c in self.attributes]}

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSchema":
        return cls(tuple((a["name"], int(a["class_count"])) for a in d["attributes"]))


@dataclass(frozen=True)
class LabeledImage:
    """Pixels (H, W, C) in [-1, 1] plus one class label per schema attribute."""

    pixels: np.ndarray
    labels: tuple[int, ...]


@dataclass
class Dataset:
    """Immutable collection of labeled images under one schema."""

    schema: AttributeSchema
    images: np.ndarray  # (N, H, W, C) float32 in [-1, 1]
    labels: np.ndarray  # (N, M) int64
    provenance: str = "unknown"
    label_names: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.labels.shape != (len(self.images), self.schema.M):
            raise ConfigurationError(
                f"labels shape {self.labels.shape} inconsistent with "
                f"{len(self.images)} images and M={self.schema.M}"
            )
        for m in range(1, self.schema.M + 1):
            col = self.labels[:, m - 1]
            if len(col) and (col.min() < 0 or col.max() >= self.schema.class_count(m)):
                raise ConfigurationError(
                    f"labels for attribute {self.schema.names[m - 1]!r} out of range"
                )
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.images)

    def __getitem__(self, i: int) -> LabeledImage:
        return LabeledImage(self.images[i], tuple(int(v) for v in self.labels[i]))

    @property
    def image_size(self) -> int:
        return self.images.shape[1]

    def label_marginals(self) -> dict[str, np.ndarray]:
        """Per-attribute label frequency vectors (for balance checks)."""
        out = {}
        for m in range(1, self.schema.M + 1):
            k = self.schema.class_count(m)
            out[self.schema.names[m - 1]] = np.bincount(
                self.labels[:, m - 1], minlength=k
            ) / max(len(self), 1)
        return out

    def select_attributes(self, names: list[str]) -> "Dataset":
        """Narrow the schema to a subset of attributes; dropped factors become
        unlabeled nuisance variation."""
        idx = [self.schema.index_of(n) - 1 for n in names]
        return Dataset(
            schema=AttributeSchema(tuple(self.schema.attributes[i] for i in idx)),
            images=self.images.copy(),
            labels=self.labels[:, idx].copy(),
            provenance=self.provenance,
            label_names={n: v for n, v in self.label_names.items() if n in names},
        )

    def subset(self, mask: np.ndarray, provenance: str | None = None) -> "Dataset":
        return Dataset(
            schema=self.schema,
            images=self.images[mask].copy(),
            labels=self.labels[mask].copy(),
            provenance=provenance or self.provenance,
            label_names=self.label_names,
        )


def holdout_split(
    dataset: Dataset, attribute: str, held_values: set[int]
) -> tuple[Dataset, Dataset]:
    """Split into (train, test); test holds exactly the items whose label for
    `attribute` lies in `held_values`."""
    m = dataset.schema.index_of(attribute)
    k = dataset.schema.class_count(m)
    if not held_values:
        raise SplitError("held_values must be nonempty")
    if not all(0 <= v < k for v in held_values):
        raise SplitError(f"held_values {held_values} outside [0, {k})")
    if len(held_values) >= k:
        raise SplitError("held_values must be a strict subset of classes")
    col = dataset.labels[:, m - 1]
    test_mask = np.isin(col, sorted(held_values))
    return (
        dataset.subset(~test_mask, provenance=dataset.provenance + ":train"),
        dataset.subset(test_mask, provenance=dataset.provenance + ":test"),
    )
