"""Run configuration: one YAML file with sections (data, model, loss_weights,
optimizer, schedule); every field has a default and all violations are
reported at once."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from .data import SyntheticConfig
from .errors import ConfigurationError
from .losses import LossWeights
from .nets import ModelConfig
from .training import OptimizerConfig, TrainConfig


@dataclass
class RunConfig:
    data: SyntheticConfig = field(default_factory=SyntheticConfig)
    model: ModelConfig = field(default_factory=lambda: ModelConfig(image_size=32))
    loss_weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: TrainConfig = field(default_factory=TrainConfig)
    manifest: str | None = None  # train on a manifest instead of synthetic data
    attributes: list[str] | None = None  # keep only these; rest become nuisance
    holdout_attribute: str | None = "shape"
    holdout_values: list[int] = field(default_factory=lambda: [0])

    def __post_init__(self):
        self.schedule.optimizer = self.optimizer
        self.schedule.weights = self.loss_weights

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"]["betas"] = list(d["optimizer"]["betas"])
        d["schedule"]["optimizer"]["betas"] = list(d["schedule"]["optimizer"]["betas"])
        return d


_SECTIONS = {
    "data": SyntheticConfig,
    "model": ModelConfig,
    "loss_weights": LossWeights,
    "optimizer": OptimizerConfig,
    "schedule": TrainConfig,
}
_TOP_LEVEL = ("manifest", "attributes", "holdout_attribute", "holdout_values")


def validate_config(path: str | Path | None, overrides: dict | None = None
                    ) -> RunConfig:
    """Load + validate a config file, filling defaults for anything omitted.
    An empty or missing-sections file resolves to the full default config.
    All errors are aggregated and reported together."""
    raw: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path}: config must be a mapping of sections")
    for section, value in (overrides or {}).items():
        raw.setdefault(section, {})
        if isinstance(value, dict):
            raw[section].update(value)
        else:
            raw[section] = value

    errors: list[str] = []
    parsed: dict = {}
    for section, cls in _SECTIONS.items():
        body = raw.get(section, {}) or {}
        if not isinstance(body, dict):
            errors.append(f"section {section!r} must be a mapping")
            continue
        known = set(cls.__dataclass_fields__)
        unknown = set(body) - known
        if unknown:
            errors.append(f"section {section!r}: unknown fields {sorted(unknown)}")
            body = {k: v for k, v in body.items() if k in known}
        if section == "schedule":
            body.pop("optimizer", None)
            body.pop("weights", None)
        if "betas" in body:
            body["betas"] = tuple(body["betas"])
        try:
            parsed[section] = cls(**body)
        except (ConfigurationError, TypeError, ValueError) as e:
            errors.append(f"section {section!r}: {e}")
    top = {k: raw[k] for k in _TOP_LEVEL if k in raw}
    unknown_sections = set(raw) - set(_SECTIONS) - set(_TOP_LEVEL)
    if unknown_sections:
        errors.append(f"unknown sections {sorted(unknown_sections)}")
    if errors:
        raise ConfigurationError("; ".join(errors))
    return RunConfig(**parsed, **top)


def write_resolved_config(config: RunConfig, path: str | Path) -> None:
    """Persist the fully resolved config so the run is replayable."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)
