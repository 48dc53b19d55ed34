from typing import Any

import numpy as np
from pydantic import Field

from .base import ArrayBaseModel, RecordBaseModel
from .reports import EpochRecord

__all__ = ["CheckpointMeta", "Checkpoint"]


class CheckpointMeta(RecordBaseModel):
    version: int
    config: dict[str, Any]
    epoch: int = Field(ge=0, description="Completed epochs")
    seed: int = Field(description="Base seed; with `epoch` it fixes every later random draw")
    history: list[EpochRecord] = Field(default_factory=list)


class Checkpoint(ArrayBaseModel):
    meta: CheckpointMeta
    tensors: dict[str, np.ndarray] = Field(description="params/*, optimizer/*, banks/* blocks")

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        start = f"{prefix}/"
        return {name[len(start):]: value for name, value in self.tensors.items() if name.startswith(start)}
