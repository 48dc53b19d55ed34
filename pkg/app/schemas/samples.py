import numpy as np
from pydantic import Field, field_validator

from .base import ArrayBaseModel

__all__ = ["ImageSample", "DatasetSplits"]


class ImageSample(ArrayBaseModel):
    pixels: np.ndarray = Field(description="H x W x C float32 values in [0, 1]")
    camera: int = Field(ge=0)
    identity: int = Field(ge=0, description="Ground truth; read only by the generator and the evaluator")

    @field_validator("pixels")
    @classmethod
    def check_pixels(cls, pixels: np.ndarray) -> np.ndarray:
        if pixels.ndim != 3:
            raise ValueError(f"pixels must be H x W x C, got shape {pixels.shape}")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise ValueError("pixel values must lie within [0, 1]")
        return pixels


class DatasetSplits(ArrayBaseModel):
    train: list[ImageSample] = Field(default_factory=list)
    query: list[ImageSample] = Field(default_factory=list)
    gallery: list[ImageSample] = Field(default_factory=list)

    @staticmethod
    def stack_pixels(samples: list[ImageSample]) -> np.ndarray:
        return np.stack([sample.pixels for sample in samples]).astype(np.float64)

    @staticmethod
    def cameras(samples: list[ImageSample]) -> np.ndarray:
        return np.array([sample.camera for sample in samples], dtype=np.int64)

    @staticmethod
    def identities(samples: list[ImageSample]) -> np.ndarray:
        return np.array([sample.identity for sample in samples], dtype=np.int64)
