"""Adversarial disentangled-attribute representation learning.

Per-attribute encoders produce latent codes that classify their own attribute,
stay uniform-posterior for every other attribute, and remain valid when
shuffled across samples — enabling label-free attribute transfer, convex
mixing, and interpolation.
"""

from .schema import AttributeSchema, Dataset, LabeledImage, holdout_split
from .data import SyntheticConfig, generate_synthetic, load_manifest
from .nets import LatentBundle, ModelBundle, ModelConfig
from .losses import LossReport, LossWeights
from .training import ShuffleSpec, TrainConfig, sample_shuffle, synthesize_shuffled, train

__version__ = "0.1.0"

__all__ = [
    "AttributeSchema", "Dataset", "LabeledImage", "holdout_split",
    "SyntheticConfig", "generate_synthetic", "load_manifest",
    "LatentBundle", "ModelBundle", "ModelConfig",
    "LossReport", "LossWeights",
    "ShuffleSpec", "TrainConfig", "sample_shuffle", "synthesize_shuffled", "train",
    "__version__",
]
