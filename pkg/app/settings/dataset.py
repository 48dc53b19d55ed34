from pydantic import BaseModel, ConfigDict, Field, model_validator


__all__ = ["DatasetSettings"]


class DatasetSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_identities: int = Field(50, gt=0)
    num_cameras: int = Field(6, ge=2, le=65535)
    images_per_camera: int = Field(4, ge=2)
    num_test_identities: int = Field(25, gt=0)
    image_height: int = Field(32, gt=0, le=65535)
    image_width: int = Field(16, gt=0, le=65535)
    image_channels: int = Field(3, gt=0, le=65535)
    n_bands: int = Field(8, gt=0)
    prototype_scale: float = Field(0.6, gt=0.0)
    tint_scale: float = Field(0.03, ge=0.0)
    noise_scale: float = Field(0.05, ge=0.0)
    min_separation_deg: float = Field(30.0, ge=0.0, lt=90.0)
    seed: int = 0
    workers: int = Field(4, gt=0)

    @model_validator(mode="after")
    def check_counts(self):
        if self.num_test_identities >= self.num_identities:
            raise ValueError("num_test_identities must leave at least one training identity")
        if self.image_height % self.n_bands:
            raise ValueError(f"image_height={self.image_height} is not divisible by n_bands={self.n_bands}")
        return self

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.image_height, self.image_width, self.image_channels

    @property
    def num_train_identities(self) -> int:
        return self.num_identities - self.num_test_identities
