from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


__all__ = ["EvalSettings", "EvalFeature"]


class EvalFeature(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"
    CONCAT = "concat"


class EvalSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    exclude_same_camera: bool = Field(True, description="Drop same-identity same-camera gallery entries")
    feature: EvalFeature = Field(
        EvalFeature.GLOBAL, description="Key used for ranking: v_global, v_local, or both concatenated"
    )
    batch_size: int = Field(64, gt=0)
