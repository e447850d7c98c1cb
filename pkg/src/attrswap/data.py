"""Synthetic dataset generation and manifest-based image ingestion.

The synthetic generator renders a filled polygon of a given hue and global
brightness at a jittered position: three ground-truth factors (shape, hue,
brightness) plus a positional nuisance that no attribute encoder should own.
"""
from __future__ import annotations

import colorsys
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from PIL import Image, ImageDraw

from .errors import ConfigurationError, IngestionError
from .schema import AttributeSchema, Dataset

MAX_SHAPE_CLASSES = 6  # circle, square, triangle, diamond, pentagon, hexagon


@dataclass(frozen=True)
class SyntheticConfig:
    image_size: int = 32
    shape_classes: int = 3
    hue_classes: int = 6
    brightness_classes: int = 3
    jitter: int = 2
    count_per_combination: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.image_size not in (32, 64, 128):
            raise ConfigurationError(f"image_size must be 32/64/128, got {self.image_size}")
        if self.count_per_combination < 1:
            raise ConfigurationError("count_per_combination must be >= 1")
        for name, k in (
            ("shape_classes", self.shape_classes),
            ("hue_classes", self.hue_classes),
            ("brightness_classes", self.brightness_classes),
        ):
            if k < 2:
                raise ConfigurationError(f"{name} must be >= 2, got {k}")
        if self.shape_classes > MAX_SHAPE_CLASSES:
            raise ConfigurationError(f"at most {MAX_SHAPE_CLASSES} shape classes supported")
        if self.jitter < 0:
            raise ConfigurationError("jitter must be >= 0")


def normalize_u8(pixels: np.ndarray) -> np.ndarray:
    """[0, 255] uint8 -> float32 in [-1, 1]."""
    return pixels.astype(np.float32) * (2.0 / 255.0) - 1.0


def denormalize_u8(pixels: np.ndarray) -> np.ndarray:
    """float in [-1, 1] -> uint8 in [0, 255]."""
    return np.clip(np.rint((pixels + 1.0) * (255.0 / 2.0)), 0, 255).astype(np.uint8)


def _polygon_points(shape: int, cx: float, cy: float, r: float) -> list[tuple[float, float]]:
    sides = {2: 3, 3: 4, 4: 5, 5: 6}[shape]
    # rotate diamonds 45deg relative to squares so shape 1 and 3 differ
    phase = -np.pi / 2 if shape != 3 else 0.0
    angles = phase + 2 * np.pi * np.arange(sides) / sides
    return [(cx + r * np.cos(a), cy + r * np.sin(a)) for a in angles]


def _render(size: int, shape: int, hue: int, hue_classes: int, brightness: float,
            dx: int, dy: int) -> np.ndarray:
    rgb = colorsys.hsv_to_rgb(hue / hue_classes, 1.0, 1.0)
    color = tuple(int(round(255 * c)) for c in rgb)
    img = Image.new("RGB", (size, size), (40, 40, 40))
    draw = ImageDraw.Draw(img)
    cx, cy = size / 2 + dx, size / 2 + dy
    r = size * 0.3
    if shape == 0:
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=color)
    elif shape == 1:
        draw.rectangle([cx - r, cy - r, cx + r, cy + r], fill=color)
    else:
        draw.polygon(_polygon_points(shape, cx, cy, r), fill=color)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = np.clip(arr * brightness, 0.0, 1.0)
    return (arr * 2.0 - 1.0).astype(np.float32)


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    """Deterministic synthetic dataset: one image per (shape, hue, brightness)
    combination repeated count_per_combination times with jittered positions."""
    rng = np.random.default_rng(config.seed)
    brightness_levels = np.linspace(0.45, 1.0, config.brightness_classes)
    images, labels = [], []
    for s in range(config.shape_classes):
        for h in range(config.hue_classes):
            for b in range(config.brightness_classes):
                for _ in range(config.count_per_combination):
                    j = config.jitter
                    dx, dy = (rng.integers(-j, j + 1, size=2) if j else (0, 0))
                    images.append(_render(
                        config.image_size, s, h, config.hue_classes,
                        float(brightness_levels[b]), int(dx), int(dy)))
                    labels.append((s, h, b))
    schema = AttributeSchema((
        ("shape", config.shape_classes),
        ("hue", config.hue_classes),
        ("brightness", config.brightness_classes),
    ))
    return Dataset(
        schema=schema,
        images=np.stack(images),
        labels=np.asarray(labels, dtype=np.int64),
        provenance=f"synthetic:seed={config.seed}",
    )


def load_manifest(manifest_path: str | Path, image_size: int = 32) -> Dataset:
    """Read a `filepath,attr1,attr2,...` CSV manifest; images are resized to
    image_size and normalized to [-1, 1]; label strings map to contiguous
    indices in sorted order, and the mapping is persisted as a sidecar."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise IngestionError(f"manifest not found: {manifest_path}")
    with open(manifest_path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{manifest_path}: empty file, expected a header row")
        if len(header) < 2 or header[0] != "filepath":
            raise IngestionError(
                f"{manifest_path}: header must be 'filepath,attr1,...', got {header}")
        attr_names = header[1:]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"{manifest_path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            rows.append((lineno, row[0], row[1:]))

    # sorted-lexicographic label index mapping, persisted for stable checkpoints
    value_sets: list[list[str]] = [sorted({r[2][i] for r in rows}) for i in range(len(attr_names))]
    if rows:
        for name, values in zip(attr_names, value_sets):
            if len(values) < 2:
                raise IngestionError(
                    f"{manifest_path}: attribute {name!r} has fewer than 2 observed labels")
    mapping = [{v: i for i, v in enumerate(vals)} for vals in value_sets]

    images, labels = [], []
    base = manifest_path.parent
    for lineno, rel, vals in rows:
        path = Path(rel)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise IngestionError(f"{manifest_path}:{lineno}: missing file {path}")
        try:
            with Image.open(path) as im:
                im = im.convert("RGB").resize((image_size, image_size), Image.BILINEAR)
                images.append(normalize_u8(np.asarray(im, dtype=np.uint8)))
        except IngestionError:
            raise
        except Exception as e:
            raise IngestionError(f"{manifest_path}:{lineno}: cannot decode {path}: {e}") from e
        labels.append([mapping[i][v] for i, v in enumerate(vals)])

    if rows:
        schema = AttributeSchema(tuple(
            (name, len(vals)) for name, vals in zip(attr_names, value_sets)))
        ds = Dataset(
            schema=schema,
            images=np.stack(images),
            labels=np.asarray(labels, dtype=np.int64),
            provenance=str(manifest_path),
            label_names={n: v for n, v in zip(attr_names, value_sets)},
        )
    else:
        schema = AttributeSchema(tuple((name, 2) for name in attr_names))
        ds = Dataset(
            schema=schema,
            images=np.zeros((0, image_size, image_size, 3), dtype=np.float32),
            labels=np.zeros((0, len(attr_names)), dtype=np.int64),
            provenance=str(manifest_path),
        )
    write_schema_sidecar(ds, manifest_path.with_suffix(manifest_path.suffix + ".schema.yaml"))
    return ds


def write_schema_sidecar(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(
            {"schema": dataset.schema.to_dict(), "label_names": dataset.label_names},
            f, sort_keys=False)


def export_dataset(dataset: Dataset, out_dir: str | Path) -> Path:
    """Write PNG files plus a manifest (and schema sidecar); returns the
    manifest path. Round-trips through load_manifest."""
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["filepath"] + dataset.schema.names)
        for i in range(len(dataset)):
            name = f"images/{i:06d}.png"
            Image.fromarray(denormalize_u8(dataset.images[i])).save(out_dir / name)
            writer.writerow([name] + [str(int(v)) for v in dataset.labels[i]])
    write_schema_sidecar(dataset, manifest.with_suffix(manifest.suffix + ".schema.yaml"))
    return manifest
