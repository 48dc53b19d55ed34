from typing import Literal

from pydantic import Field

from .base import RecordBaseModel

__all__ = ["EpochRecord", "EvalReport", "AblationRow"]


class EpochRecord(RecordBaseModel):
    epoch: int
    phase: Literal["init", "train"]
    loss_global: float
    loss_local: float
    loss_total: float


class EvalReport(RecordBaseModel):
    rank1: float
    rank5: float
    rank10: float
    map_score: float = Field(alias="mAP")
    num_queries: int
    num_excluded: int = Field(description="Same-identity same-camera gallery entries removed")
    num_skipped: int = Field(0, description="Queries without any valid match")


class AblationRow(RecordBaseModel):
    setting: str
    seeds: str
    map_score: float = Field(alias="mAP")
    rank1: float
