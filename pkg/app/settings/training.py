from enum import Enum
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.utils import ConfigError


__all__ = ["SimilaritySettings", "LossSettings", "TrainSettings", "MixtureSource", "MixtureUpdate"]


class MixtureSource(str, Enum):
    JOINT = "joint"
    GLOBAL = "global"
    LOCAL = "local"


class MixtureUpdate(str, Enum):
    PER_SAMPLE = "per_sample"
    PER_BATCH = "per_batch"


class SimilaritySettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beta: float = Field(0.5, ge=0.0, le=1.0, description="Weight of the global distance")
    lambda_c: float = Field(0.005, ge=0.0, description="Same-camera distance penalty")
    n_plus: int = Field(7, ge=0)
    n_minus: Annotated[int, Field(ge=0)] | Literal["all"] = 500

    def resolve_n_minus(self, n_samples: int) -> int:
        """Concrete negatives count for a training set of `n_samples` images."""
        if self.n_minus == "all":
            return n_samples - self.n_plus - 1
        return self.n_minus

    def validate_for(self, n_samples: int) -> None:
        n_minus = self.resolve_n_minus(n_samples)
        if n_minus < 0 or self.n_plus + n_minus > n_samples - 1:
            raise ConfigError(
                f"n_plus={self.n_plus} + n_minus={n_minus} exceeds the {n_samples - 1} "
                f"candidates available per anchor"
            )


class LossSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tau: float = Field(0.05, gt=0.0, description="Softmax temperature")
    lambda_t: float = Field(0.5, ge=0.0, le=1.0, description="Contribution of the anchor itself")
    alpha: float = Field(1.75, gt=0.0, description="Expanding coefficient of the other positives")
    lambda_p: float = Field(0.5, ge=0.0, le=1.0, description="Weight of the local loss")


class TrainSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(50, ge=2)
    init_epochs: int = Field(5, ge=1)
    batch_size: int = Field(8, ge=1)
    learning_rate: float = Field(1e-3, gt=0.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    seed: int = 0
    flip_probability: float = Field(0.5, ge=0.0, le=1.0)
    mixture_source: MixtureSource = MixtureSource.JOINT
    mixture_update: MixtureUpdate = MixtureUpdate.PER_SAMPLE
    progress: bool = True

    @model_validator(mode="after")
    def check_phases(self):
        if self.init_epochs >= self.epochs:
            raise ValueError(f"init_epochs={self.init_epochs} must be below epochs={self.epochs}")
        return self
