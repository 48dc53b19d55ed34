from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.utils import ConfigError

from .dataset import DatasetSettings
from .evaluation import EvalSettings
from .model import ModelSettings
from .training import LossSettings, SimilaritySettings, TrainSettings


__all__ = ["PathSettings", "RunConfig"]


class PathSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: Path = Path("data.scrd")
    checkpoint: Path = Path("model.scck")
    metrics: Path = Path("metrics.csv")
    report: Path = Path("report.json")


class RunConfig(BaseSettings):
    """Complete configuration of a run.

    Values come from a YAML file (see config/default.yaml); anything the file
    leaves out may be set from the environment, e.g. SCREID_TRAIN__SEED=3.
    """
    model_config = SettingsConfigDict(
        env_prefix="SCREID_",
        env_nested_delimiter="__",
        env_file="./config/screid.env",
        extra="forbid",
    )

    model: ModelSettings = Field(default_factory=ModelSettings)
    dataset: DatasetSettings = Field(default_factory=DatasetSettings)
    similarity: SimilaritySettings = Field(default_factory=SimilaritySettings)
    loss: LossSettings = Field(default_factory=LossSettings)
    train: TrainSettings = Field(default_factory=TrainSettings)
    eval: EvalSettings = Field(default_factory=EvalSettings)
    paths: PathSettings = Field(default_factory=PathSettings)

    @model_validator(mode="after")
    def check_geometry(self):
        height, width, _ = self.dataset.image_shape
        if height % self.model.feature_height or width % self.model.feature_width:
            raise ValueError(
                f"image {height}x{width} does not tile into the "
                f"{self.model.feature_height}x{self.model.feature_width} feature map"
            )
        return self

    @classmethod
    def from_file(cls, path: Path | None = None) -> "RunConfig":
        if path is None:
            return cls.load({})
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"Config file {path} must hold a mapping at top level")
        return cls.load(raw)

    @classmethod
    def load(cls, raw: dict[str, Any]) -> "RunConfig":
        try:
            return cls(**raw)
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration:\n{e}") from e

    def snapshot(self) -> dict[str, Any]:
        return self.model_dump(mode="json")

    def override(self, dotted_key: str, value: Any) -> "RunConfig":
        """Copy of this config with one `group.field` replaced and revalidated."""
        group, _, field = dotted_key.partition(".")
        data = self.snapshot()
        if group not in data or field not in data[group]:
            raise ConfigError(f"Unknown configuration key '{dotted_key}'")
        data[group][field] = value
        return type(self).load(data)
