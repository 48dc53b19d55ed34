from pydantic import BaseModel, ConfigDict

__all__ = ["ArrayBaseModel", "RecordBaseModel"]


class ArrayBaseModel(BaseModel):
    """Records carrying numpy arrays or tensors; arrays are checked by type only."""
    model_config = ConfigDict(arbitrary_types_allowed=True)


class RecordBaseModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")
